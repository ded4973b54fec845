"""Compiled inner loops. Hypergraphs arrive as CSR arrays (see WeightedHypergraph)."""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def site_interaction(i, y, vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights):
    """f_i(y_{-i}) = sum over edges e containing i of w_e * prod_{v in e, v != i} y_v."""
    total = 0.0
    for a in range(vertex_ptr[i], vertex_ptr[i + 1]):
        k = vertex_edges[a]
        prod = weights[k]
        for b in range(edge_ptr[k], edge_ptr[k + 1]):
            v = edge_vertices[b]
            if v != i:
                prod *= y[v]
        total += prod
    return total


@numba.njit(cache=True)
def gray_log_weights(n, vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights, h, beta):
    """Unnormalized log-probabilities of all 2^n configurations.

    Entry ``c`` belongs to the configuration whose spin ``v`` is +1 iff bit
    ``v`` of ``c`` is set. Configurations are visited in Gray-code order so
    each step flips one spin and updates the log-weight through that site's
    interaction field.
    """
    size = 1 << n
    out = np.empty(size)
    y = -np.ones(n)
    cur = 0.0
    for v in range(n):
        cur -= h[v]
    # f(all -1) = sum_e w_e (-1)^{|e|}
    for k in range(len(weights)):
        s = weights[k]
        if (edge_ptr[k + 1] - edge_ptr[k]) % 2 == 1:
            s = -s
        cur += beta * s
    code = 0
    out[0] = cur
    for step in range(1, size):
        v = 0
        t = step
        while (t & 1) == 0:
            t >>= 1
            v += 1
        fv = site_interaction(v, y, vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights)
        cur -= 2.0 * y[v] * (h[v] + beta * fv)
        y[v] = -y[v]
        code ^= 1 << v
        out[code] = cur
    return out


@numba.njit(cache=True)
def gray_statistics(n, vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights, x):
    """Sufficient statistics ``(sum_i y_i x_i, f(y))`` of all 2^n configurations."""
    size = 1 << n
    d = x.shape[1]
    out = np.empty((size, d + 1))
    y = -np.ones(n)
    s = np.zeros(d)
    for v in range(n):
        for k in range(d):
            s[k] -= x[v, k]
    fval = 0.0
    for k in range(len(weights)):
        w = weights[k]
        if (edge_ptr[k + 1] - edge_ptr[k]) % 2 == 1:
            w = -w
        fval += w
    code = 0
    out[0, :d] = s
    out[0, d] = fval
    for step in range(1, size):
        v = 0
        t = step
        while (t & 1) == 0:
            t >>= 1
            v += 1
        fv = site_interaction(v, y, vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights)
        fval -= 2.0 * y[v] * fv
        for k in range(d):
            s[k] -= 2.0 * y[v] * x[v, k]
        y[v] = -y[v]
        code ^= 1 << v
        out[code, :d] = s
        out[code, d] = fval
    return out


@numba.njit(cache=True)
def glauber_sweeps(states, sweeps, random_scan, rng,
                   vertex_ptr, vertex_edges, edge_ptr, edge_vertices, weights, h, beta):
    """Run heat-bath sweeps in place on every row of ``states``.

    Each site update draws y_i = +1 with probability
    1 / (1 + exp(-2 (h_i + beta f_i))). Chains are advanced one after another,
    so the draw sequence is a fixed function of the generator state.
    """
    chains, n = states.shape
    order = np.arange(n)
    for c in range(chains):
        y = states[c]
        for _ in range(sweeps):
            if random_scan:
                for a in range(n - 1, 0, -1):
                    b = rng.integers(0, a + 1)
                    tmp = order[a]
                    order[a] = order[b]
                    order[b] = tmp
            for a in range(n):
                i = order[a] if random_scan else a
                fi = site_interaction(i, y, vertex_ptr, vertex_edges, edge_ptr, edge_vertices,
                                      weights)
                z = h[i] + beta * fi
                p_up = 1.0 / (1.0 + np.exp(-2.0 * z))
                y[i] = 1.0 if rng.random() < p_up else -1.0
    return states
