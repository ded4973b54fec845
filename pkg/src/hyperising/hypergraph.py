"""Weighted hypergraphs with edges of cardinality 2..m.

The interaction polynomial of the model is ``f(y) = sum_e w_e prod_{v in e} y_v``;
one hyperedge per monomial. Vertices are dense integers ``0..n-1``.

Text format, one edge per line::

    hypergraph n=5 m=3
    # weight v1 v2 ... vk
    0.5 0 1 2
    -0.25 3 4
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from collections.abc import Iterable, Sequence
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import HypergraphFormatError

__all__ = [
    "WeightedHypergraph",
    "vertex_degree",
    "top_mass",
    "normalize_degrees",
    "parse_hypergraph",
    "format_hypergraph",
    "read_hypergraph",
    "write_hypergraph",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class WeightedHypergraph:
    """Immutable weighted hypergraph ``G = (V, E, w)``.

    Construction sorts each edge's vertices, drops zero-weight edges and
    rejects anything else that would make the model ambiguous: repeated
    vertices inside an edge, cardinality outside ``[2, m]``, out-of-range
    vertices, non-finite weights, and two edges on the same vertex set
    (callers must aggregate those themselves).
    """

    def __init__(self, n: int, m: int, edges: Iterable[tuple[Sequence[int], float]] = ()):
        if int(n) != n or n < 1:
            raise HypergraphFormatError(f"vertex count must be a positive integer, got {n!r}")
        if int(m) != m or m < 2:
            raise HypergraphFormatError(f"max edge cardinality must be >= 2, got {m!r}")
        n, m = int(n), int(m)

        seen: set[tuple[int, ...]] = set()
        kept_edges: list[tuple[int, ...]] = []
        kept_weights: list[float] = []
        for verts, w in edges:
            verts = tuple(int(v) for v in verts)
            key = tuple(sorted(verts))
            if len(set(key)) != len(key):
                raise HypergraphFormatError(f"edge {verts} repeats a vertex")
            if not 2 <= len(key) <= m:
                raise HypergraphFormatError(
                    f"edge {verts} has cardinality {len(key)}, expected 2..{m}")
            if key[0] < 0 or key[-1] >= n:
                raise HypergraphFormatError(f"edge {verts} has a vertex outside [0, {n})")
            w = float(w)
            if not math.isfinite(w):
                raise HypergraphFormatError(f"edge {verts} has non-finite weight {w}")
            if key in seen:
                raise HypergraphFormatError(f"duplicate edge on vertex set {key}")
            seen.add(key)
            if w == 0.0:
                continue
            kept_edges.append(key)
            kept_weights.append(w)

        self.n = n
        self.m = m
        self.edges: tuple[tuple[int, ...], ...] = tuple(kept_edges)
        self.weights = _readonly(np.asarray(kept_weights, dtype=np.float64))

        sizes = np.fromiter((len(e) for e in kept_edges), dtype=np.int64, count=len(kept_edges))
        self.edge_ptr = _readonly(np.concatenate(([0], np.cumsum(sizes))).astype(np.int64))
        self.edge_vertices = _readonly(
            np.fromiter((v for e in kept_edges for v in e), dtype=np.int64,
                        count=int(sizes.sum())))

        # vertex -> incident edges, CSR layout
        owner = np.repeat(np.arange(len(kept_edges), dtype=np.int64), sizes)
        order = np.argsort(self.edge_vertices, kind="stable")
        counts = np.bincount(self.edge_vertices, minlength=n)
        self.vertex_ptr = _readonly(np.concatenate(([0], np.cumsum(counts))).astype(np.int64))
        self.vertex_edges = _readonly(owner[order])

    # -- basic queries -------------------------------------------------------

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_sizes(self) -> np.ndarray:
        return _readonly(np.diff(self.edge_ptr))

    @cached_property
    def edge_table(self) -> np.ndarray:
        """``(E, m)`` vertex table padded with the sentinel index ``n``."""
        table = np.full((self.num_edges, self.m), self.n, dtype=np.int64)
        for k, e in enumerate(self.edges):
            table[k, : len(e)] = e
        return _readonly(table)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Sparse ``n x E`` 0/1 incidence matrix."""
        data = np.ones(len(self.edge_vertices))
        owner = np.repeat(np.arange(self.num_edges), self.edge_sizes)
        return sp.csr_matrix((data, (self.edge_vertices, owner)), shape=(self.n, self.num_edges))

    @cached_property
    def per_vertex(self) -> tuple[tuple[int, ...], ...]:
        return tuple(
            tuple(int(k) for k in self.vertex_edges[self.vertex_ptr[i]:self.vertex_ptr[i + 1]])
            for i in range(self.n))

    @cached_property
    def per_pair(self) -> dict[tuple[int, int], tuple[int, ...]]:
        """Edges containing both ``i`` and ``j``, keyed by ``(i, j)`` with ``i < j``."""
        pairs: dict[tuple[int, int], list[int]] = defaultdict(list)
        for k, e in enumerate(self.edges):
            for a in range(len(e)):
                for b in range(a + 1, len(e)):
                    pairs[(e[a], e[b])].append(k)
        return {key: tuple(v) for key, v in pairs.items()}

    @cached_property
    def edge_index(self) -> dict[tuple[int, ...], int]:
        return {e: k for k, e in enumerate(self.edges)}

    def weight_of(self, verts: Iterable[int]) -> float:
        """Weight of the edge on ``verts`` (any order), 0.0 if absent."""
        k = self.edge_index.get(tuple(sorted(int(v) for v in verts)))
        return 0.0 if k is None else float(self.weights[k])

    def degrees(self) -> np.ndarray:
        """``sum_{e ∋ i} |w_e|`` for every vertex."""
        return self.incidence @ np.abs(self.weights) if self.num_edges else np.zeros(self.n)

    def top_edges(self) -> list[int]:
        return [k for k, e in enumerate(self.edges) if len(e) == self.m]

    def scaled(self, s: float) -> WeightedHypergraph:
        return WeightedHypergraph(self.n, self.m, zip(self.edges, self.weights * s))

    def _check_vertex(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise IndexError(f"vertex {i} out of range [0, {self.n})")
        return int(i)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightedHypergraph):
            return NotImplemented
        return (self.n == other.n and self.m == other.m and self.edges == other.edges
                and np.array_equal(self.weights, other.weights))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"WeightedHypergraph(n={self.n}, m={self.m}, edges={self.num_edges})"


def vertex_degree(g: WeightedHypergraph, i: int) -> float:
    i = g._check_vertex(i)
    ks = g.vertex_edges[g.vertex_ptr[i]:g.vertex_ptr[i + 1]]
    return float(np.abs(g.weights[ks]).sum())


def top_mass(g: WeightedHypergraph) -> float:
    """Sum of squared weights over edges of cardinality exactly ``m``."""
    if g.num_edges == 0:
        return 0.0
    w = g.weights[g.edge_sizes == g.m]
    return float(w @ w)


def normalize_degrees(g: WeightedHypergraph, cap: float = 1.0) -> WeightedHypergraph:
    """Scale all weights by ``min(1, cap / max_degree)``."""
    if cap <= 0:
        raise ValueError("cap must be positive")
    if g.num_edges == 0:
        return g
    max_deg = float(g.degrees().max())
    # the tolerance keeps an already-normalized graph fixed despite rounding
    if max_deg <= cap * (1 + 1e-12):
        return g
    return g.scaled(cap / max_deg)


# -- text format ---------------------------------------------------------------

_HEADER = re.compile(r"^hypergraph\s+n\s*=\s*(\d+)\s+m\s*=\s*(\d+)\s*$")


def parse_hypergraph(text: str) -> WeightedHypergraph:
    header = None
    edges: list[tuple[tuple[int, ...], float]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            match = _HEADER.match(line)
            if not match:
                raise HypergraphFormatError(
                    f"line {lineno}: expected header 'hypergraph n=<n> m=<m>'")
            header = int(match.group(1)), int(match.group(2))
            continue
        parts = line.split()
        try:
            w = float(parts[0])
            verts = tuple(int(p) for p in parts[1:])
        except ValueError as exc:
            raise HypergraphFormatError(f"line {lineno}: {exc}") from None
        n, m = header
        if len(verts) < 2 or len(verts) > m:
            raise HypergraphFormatError(
                f"line {lineno}: edge has {len(verts)} vertices, expected 2..{m}")
        if len(set(verts)) != len(verts):
            raise HypergraphFormatError(f"line {lineno}: repeated vertex")
        if min(verts) < 0 or max(verts) >= n:
            raise HypergraphFormatError(f"line {lineno}: vertex out of range [0, {n})")
        edges.append((verts, w))
    if header is None:
        raise HypergraphFormatError("missing 'hypergraph n=<n> m=<m>' header")
    try:
        return WeightedHypergraph(header[0], header[1], edges)
    except HypergraphFormatError:
        raise
    except ValueError as exc:  # pragma: no cover - defensive
        raise HypergraphFormatError(str(exc)) from None


def format_hypergraph(g: WeightedHypergraph) -> str:
    lines = [f"hypergraph n={g.n} m={g.m}"]
    lines += [f"{w!r} " + " ".join(map(str, e)) for e, w in zip(g.edges, g.weights.tolist())]
    return "\n".join(lines) + "\n"


def read_hypergraph(path: str | Path) -> WeightedHypergraph:
    return parse_hypergraph(Path(path).read_text())


def write_hypergraph(g: WeightedHypergraph, path: str | Path) -> None:
    Path(path).write_text(format_hypergraph(g))
