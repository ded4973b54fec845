"""Draw the observed configuration: exact inverse-CDF sampling or Glauber dynamics.

All randomness comes from ``numpy.random.Generator(Philox(seed))``, a
counter-based generator with 64-bit seeding. A run is a pure function of its
inputs and seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import _kernels
from .errors import DimensionMismatch
from .hypergraph import WeightedHypergraph
from .model import (
    ENUMERATION_CAP,
    ModelParameters,
    _check_dims,
    as_spins,
    enumerate_log_weights,
    spins_from_codes,
)

__all__ = ["RNG_NAME", "ChainConfig", "make_rng", "sample_exact", "sample_glauber",
           "exact_distribution"]

RNG_NAME = "numpy Philox4x64-10"


def make_rng(seed) -> np.random.Generator:
    """Philox stream for an integer seed or a ``SeedSequence``."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


@dataclass(frozen=True)
class ChainConfig:
    seed: int
    burn_in_sweeps: int = 200
    scan_order: Literal["sequential", "random"] = "sequential"

    def __post_init__(self):
        if self.burn_in_sweeps < 0:
            raise ValueError("burn_in_sweeps must be >= 0")
        if self.scan_order not in ("sequential", "random"):
            raise ValueError(f"unknown scan order {self.scan_order!r}")


def exact_distribution(g: WeightedHypergraph, x, p: ModelParameters,
                       cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Probabilities of all ``2^n`` configurations, indexed by spin code."""
    logw = enumerate_log_weights(g, x, p, cap)
    prob = np.exp(logw - logw.max())
    return prob / prob.sum()


def sample_exact(g: WeightedHypergraph, x, p: ModelParameters, seed,
                 size: int | None = None, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Exact draw(s) by inverse CDF over the enumerated table.

    Returns one configuration, or a ``(size, n)`` array when ``size`` is given.
    """
    prob = exact_distribution(g, x, p, cap)
    cdf = np.cumsum(prob)
    cdf /= cdf[-1]
    rng = make_rng(seed)
    u = rng.random(1 if size is None else size)
    codes = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
    out = spins_from_codes(codes, g.n)
    return out[0] if size is None else out


def sample_glauber(g: WeightedHypergraph, x, p: ModelParameters, cfg: ChainConfig,
                   init="random", chains: int | None = None) -> np.ndarray:
    """State after ``cfg.burn_in_sweeps`` heat-bath sweeps.

    With ``chains`` set, that many independent chains are run and a
    ``(chains, n)`` array is returned; ``init`` may then be one configuration
    (shared start) or one row per chain.
    """
    x = _check_dims(g, x, p)
    rng = make_rng(cfg.seed)
    rows = 1 if chains is None else int(chains)
    if isinstance(init, str):
        if init != "random":
            raise ValueError("init must be 'random' or a spin configuration")
        states = rng.choice(np.array([-1.0, 1.0]), size=(rows, g.n))
    else:
        start = as_spins(init, g.n)
        if start.ndim == 2 and start.shape[0] != rows:
            raise DimensionMismatch(f"init has {start.shape[0]} rows for {rows} chains")
        states = np.array(np.broadcast_to(start, (rows, g.n)), dtype=np.float64)
    h = np.ascontiguousarray(x @ p.theta)
    _kernels.glauber_sweeps(states, int(cfg.burn_in_sweeps), cfg.scan_order == "random", rng,
                            g.vertex_ptr, g.vertex_edges, g.edge_ptr, g.edge_vertices,
                            g.weights, h, p.beta)
    return states[0] if chains is None else states
