import itertools

import numpy as np
import pytest

from hyperising import ModelParameters, ParameterBox, WeightedHypergraph, normalize_degrees


def random_hypergraph(rng, n, m, n_edges=None, cap=1.0):
    """Random edges of cardinality 2..m (always including some of size m), degree-capped."""
    n_edges = n_edges if n_edges is not None else 2 * n
    edges = {}
    for k in range(n_edges):
        size = m if k % 2 == 0 else int(rng.integers(2, m + 1))
        size = min(size, n)
        verts = tuple(sorted(rng.choice(n, size=size, replace=False).tolist()))
        edges[verts] = float(rng.uniform(-1, 1))
    g = WeightedHypergraph(n, m, edges.items())
    return normalize_degrees(g, cap)


def random_covariates(rng, n, d, bound):
    x = rng.standard_normal((n, d))
    norms = np.linalg.norm(x, axis=1)
    over = norms > bound
    x[over] *= (bound / norms[over])[:, None]
    return x


def random_params(rng, d, box, frac=0.9):
    theta = rng.standard_normal(d)
    theta *= frac * box.theta_bound * rng.random() / max(np.linalg.norm(theta), 1e-300)
    beta = rng.uniform(-frac, frac) * box.beta_bound
    return ModelParameters(theta, beta)


def random_instance(rng, n, d, m, box=None):
    box = box or ParameterBox(1.0, 1.0, 2.0)
    g = random_hypergraph(rng, n, m)
    x = random_covariates(rng, n, d, box.feature_bound)
    return g, x, random_params(rng, d, box), box


def all_configs(n):
    """All spin vectors in lexicographic order of itertools.product."""
    return np.array(list(itertools.product([-1.0, 1.0], repeat=n)))


def naive_f(g, y):
    return sum(w * np.prod([y[v] for v in e]) for e, w in zip(g.edges, g.weights))


def naive_joint(g, x, p):
    """Dict config-tuple -> probability from a per-config loop, independent of the kernels."""
    ys = all_configs(g.n)
    logw = np.array([float(y @ (x @ p.theta)) + p.beta * naive_f(g, y) for y in ys])
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return {tuple(y): float(pw) for y, pw in zip(ys, w)}


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
