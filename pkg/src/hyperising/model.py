"""The hypergraph Ising measure with covariate-driven external fields.

    Pr[y] ∝ exp( sum_i (theta . x_i) y_i + beta * f(y) ),   y in {-1, +1}^n

``f`` is the multilinear polynomial of a :class:`WeightedHypergraph`.
Spins are float arrays of +-1; batched functions accept a ``(chains, n)``
array and return one value per row.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .covariates import as_covariates
from .errors import DimensionMismatch, TooLarge
from .hypergraph import WeightedHypergraph

__all__ = [
    "ENUMERATION_CAP",
    "ModelParameters",
    "ParameterBox",
    "as_spins",
    "external_field",
    "local_fields",
    "f_value",
    "f_partial",
    "conditional_prob",
    "log_weight",
    "log_partition",
    "enumerate_log_weights",
    "enumerate_statistics",
    "spins_from_codes",
    "read_sample",
    "write_sample",
    "read_parameters",
    "write_parameters",
]

ENUMERATION_CAP = 22


@dataclass(frozen=True)
class ModelParameters:
    """Covariate coefficients ``theta`` (length d) and interaction strength ``beta``."""

    theta: np.ndarray
    beta: float

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=np.float64)).copy()
        if theta.ndim != 1:
            raise DimensionMismatch("theta must be a vector")
        if not (np.all(np.isfinite(theta)) and math.isfinite(self.beta)):
            raise ValueError("parameters must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def d(self) -> int:
        return self.theta.shape[0]

    def as_vector(self) -> np.ndarray:
        """``(theta_1, ..., theta_d, beta)``, the layout used by gradients."""
        return np.append(self.theta, self.beta)

    @classmethod
    def from_vector(cls, v) -> ModelParameters:
        v = np.asarray(v, dtype=np.float64)
        return cls(v[:-1], float(v[-1]))

    @classmethod
    def zeros(cls, d: int) -> ModelParameters:
        return cls(np.zeros(d), 0.0)


@dataclass(frozen=True)
class ParameterBox:
    """Feasible set ``{|beta| <= beta_bound, ||theta||_2 <= theta_bound}``.

    ``feature_bound`` bounds every ``||x_i||_2``; it sets the field bound
    ``beta_bound + feature_bound * theta_bound`` and the smoothness constant.
    """

    beta_bound: float
    theta_bound: float
    feature_bound: float

    def __post_init__(self):
        for name in ("beta_bound", "theta_bound", "feature_bound"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")

    @property
    def field_bound(self) -> float:
        return self.beta_bound + self.feature_bound * self.theta_bound

    @property
    def smoothness(self) -> float:
        """``M^2 + 1``: bound on ``lambda_max`` of the negative LPL Hessian."""
        return self.feature_bound ** 2 + 1.0

    def contains(self, p: ModelParameters, *, strict: bool = False, tol: float = 1e-12) -> bool:
        tn = float(np.linalg.norm(p.theta))
        if strict:
            return abs(p.beta) < self.beta_bound and tn < self.theta_bound
        return abs(p.beta) <= self.beta_bound + tol and tn <= self.theta_bound + tol


# -- validation helpers -----------------------------------------------------------------


def as_spins(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim not in (1, 2):
        raise DimensionMismatch(f"spins must be a vector or (chains, n) array, got {y.shape}")
    if n is not None and y.shape[-1] != n:
        raise DimensionMismatch(f"spin vector has length {y.shape[-1]}, expected {n}")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("spins must be exactly -1 or +1")
    return y


def _check_dims(g: WeightedHypergraph, x, p: ModelParameters) -> np.ndarray:
    x = as_covariates(x, g.n)
    if x.shape[1] != p.d:
        raise DimensionMismatch(f"theta has length {p.d}, covariates have {x.shape[1]} columns")
    return x


def external_field(x, p: ModelParameters) -> np.ndarray:
    """Per-vertex field cache ``theta . x_i``."""
    x = as_covariates(x)
    if x.shape[1] != p.d:
        raise DimensionMismatch(f"theta has length {p.d}, covariates have {x.shape[1]} columns")
    return x @ p.theta


# -- interaction polynomial ------------------------------------------------------------


def _edge_monomials(g: WeightedHypergraph, y: np.ndarray) -> np.ndarray:
    """``prod_{v in e} y_v`` for each edge (last axis), batched over leading axes."""
    pad = np.ones(y.shape[:-1] + (1,))
    yp = np.concatenate([y, pad], axis=-1)
    return yp[..., g.edge_table].prod(axis=-1)


def f_value(g: WeightedHypergraph, y) -> np.ndarray | float:
    y = as_spins(y, g.n)
    if g.num_edges == 0:
        return 0.0 if y.ndim == 1 else np.zeros(y.shape[0])
    out = _edge_monomials(g, y) @ g.weights
    return float(out) if y.ndim == 1 else out


def local_fields(g: WeightedHypergraph, y) -> np.ndarray:
    """The vector ``(f_1(y_{-1}), ..., f_n(y_{-n}))``.

    Uses ``f_i = y_i * sum_{e ∋ i} w_e y_e``, valid because ``y_i^2 = 1``.
    """
    y = as_spins(y, g.n)
    if g.num_edges == 0:
        return np.zeros(y.shape)
    signed = _edge_monomials(g, y) * g.weights
    if y.ndim == 1:
        return y * (g.incidence @ signed)
    return y * (g.incidence @ signed.T).T


def f_partial(g: WeightedHypergraph, y, i: int) -> float:
    """``f_i(y_{-i}) = df/dy_i``; never reads ``y[i]``."""
    y = as_spins(y, g.n)
    if y.ndim != 1:
        raise DimensionMismatch("f_partial takes a single configuration")
    i = g._check_vertex(i)
    return float(_kernels.site_interaction(i, y, g.vertex_ptr, g.vertex_edges, g.edge_ptr,
                                           g.edge_vertices, g.weights))


# -- conditional and joint law ---------------------------------------------------------


def conditional_prob(g: WeightedHypergraph, x, p: ModelParameters, y, i: int, s: int) -> float:
    """``Pr[y_i = s | y_{-i}]`` under the model."""
    if s not in (-1, 1):
        raise ValueError("spin value must be -1 or +1")
    x = _check_dims(g, x, p)
    fi = f_partial(g, y, i)
    z = float(x[i] @ p.theta) + p.beta * fi
    # 1 / (1 + exp(-2 z s)) without overflow
    t = -2.0 * z * s
    if t > 0:
        e = math.exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(t))


def log_weight(g: WeightedHypergraph, x, p: ModelParameters, y) -> np.ndarray | float:
    """Unnormalized log-probability ``sum_i (theta . x_i) y_i + beta f(y)``."""
    x = _check_dims(g, x, p)
    y = as_spins(y, g.n)
    out = y @ (x @ p.theta) + p.beta * f_value(g, y)
    return float(out) if y.ndim == 1 else out


def _check_cap(g: WeightedHypergraph, cap: int) -> None:
    if g.n > cap:
        raise TooLarge(f"n={g.n} exceeds the enumeration cap {cap}")


def enumerate_log_weights(g: WeightedHypergraph, x, p: ModelParameters,
                          cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Log-weights of all ``2^n`` configurations, indexed by spin code.

    Code ``c`` has ``y_v = +1`` iff bit ``v`` is set (see :func:`spins_from_codes`).
    """
    x = _check_dims(g, x, p)
    _check_cap(g, cap)
    h = np.ascontiguousarray(x @ p.theta)
    return _kernels.gray_log_weights(g.n, g.vertex_ptr, g.vertex_edges, g.edge_ptr,
                                     g.edge_vertices, g.weights, h, p.beta)


def enumerate_statistics(g: WeightedHypergraph, x, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``(2^n, d+1)`` table of ``(sum_i y_i x_i, f(y))`` per spin code.

    Log-weights for any parameters are then ``table @ p.as_vector()``.
    """
    x = as_covariates(x, g.n)
    _check_cap(g, cap)
    return _kernels.gray_statistics(g.n, g.vertex_ptr, g.vertex_edges, g.edge_ptr,
                                    g.edge_vertices, g.weights, np.ascontiguousarray(x))


def log_partition(g: WeightedHypergraph, x, p: ModelParameters,
                  cap: int = ENUMERATION_CAP) -> float:
    """Exact ``log Z`` by enumeration (max-shifted log-sum-exp)."""
    return float(logsumexp(enumerate_log_weights(g, x, p, cap)))


def spins_from_codes(codes, n: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    bits = (codes[..., None] >> np.arange(n)) & 1
    return (2.0 * bits - 1.0)


# -- files -----------------------------------------------------------------------------


def read_sample(path: str | Path, n: int | None = None, zero_one: bool = False) -> np.ndarray:
    """Read a one-line sample file; ``zero_one`` maps 0 -> -1 and 1 -> +1."""
    tokens = Path(path).read_text().split()
    try:
        y = np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if zero_one:
        if not np.all((y == 0) | (y == 1)):
            raise ValueError(f"{path}: expected entries in {{0, 1}}")
        y = 2 * y - 1
    return as_spins(y, n)


def write_sample(y, path: str | Path, zero_one: bool = False) -> None:
    y = as_spins(y)
    if y.ndim != 1:
        raise DimensionMismatch("a sample file holds one configuration")
    vals = ((y + 1) // 2).astype(int) if zero_one else y.astype(int)
    Path(path).write_text(" ".join(map(str, vals.tolist())) + "\n")


def read_parameters(path: str | Path) -> ModelParameters:
    """Read ``theta = t1 t2 ...`` / ``beta = b`` key-value lines."""
    fields: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=") if "=" in line else line.partition(":")
        if not sep:
            raise ValueError(f"{path}: cannot parse line {line!r}")
        fields[key.strip()] = value.strip()
    try:
        theta = np.array([float(t) for t in fields["theta"].replace(",", " ").split()])
        beta = float(fields["beta"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc}") from None
    return ModelParameters(theta, beta)


def write_parameters(p: ModelParameters, path: str | Path) -> None:
    theta = " ".join(repr(t) for t in p.theta.tolist())
    Path(path).write_text(f"theta = {theta}\nbeta = {p.beta!r}\n")
