"""Log-pseudolikelihood of one sample, with gradient and Hessian.

For a fixed sample ``y`` every site contributes through its design row
``X_i = (x_i, f_i(y_{-i}))`` and the local field ``z_i = theta . x_i + beta f_i``:

    LPL = (1/n) sum_i [ y_i z_i - log cosh z_i ] - log 2
    grad = (1/n) sum_i (y_i - tanh z_i) X_i
    -H   = (1/n) sum_i sech^2(z_i) X_i X_i^T
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import OutOfBox
from .hypergraph import WeightedHypergraph
from .model import ModelParameters, ParameterBox, _check_dims, as_spins, local_fields

__all__ = [
    "LplObjective",
    "LplEvaluation",
    "SandwichResult",
    "log_cosh",
    "sech2",
    "lpl",
    "lpl_gradient",
    "lpl_neg_hessian",
    "lpl_evaluate",
    "sandwich_check",
]

LOG2 = math.log(2.0)


def log_cosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - LOG2


def sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class LplEvaluation:
    value: float
    gradient: np.ndarray
    neg_hessian_min_eig: float | None = None


class LplObjective:
    """LPL for a fixed ``(g, x, y)``; the interaction fields are computed once.

    Parameter vectors use the layout ``(theta_1, ..., theta_d, beta)``.
    """

    def __init__(self, g: WeightedHypergraph, x, y):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        x = _check_dims(g, x, ModelParameters.zeros(x.shape[1]))
        self.y = as_spins(y, g.n)
        if self.y.ndim != 1:
            raise ValueError("the objective takes a single sample")
        self.f = local_fields(g, self.y)
        self.design = np.column_stack([x, self.f])
        self.n, self.dim = self.design.shape

    @property
    def d(self) -> int:
        return self.dim - 1

    def _fields(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"parameter vector must have length {self.dim}")
        return self.design @ v

    def value(self, v) -> float:
        z = self._fields(v)
        return float(np.mean(self.y * z - log_cosh(z)) - LOG2)

    def gradient(self, v) -> np.ndarray:
        z = self._fields(v)
        return self.design.T @ (self.y - np.tanh(z)) / self.n

    def value_and_gradient(self, v) -> tuple[float, np.ndarray]:
        z = self._fields(v)
        value = float(np.mean(self.y * z - log_cosh(z)) - LOG2)
        return value, self.design.T @ (self.y - np.tanh(z)) / self.n

    def neg_hessian(self, v) -> np.ndarray:
        z = self._fields(v)
        weighted = self.design * sech2(z)[:, None]
        h = weighted.T @ self.design / self.n
        return 0.5 * (h + h.T)

    def gram(self) -> np.ndarray:
        """``(1/n) sum_i X_i X_i^T``, the ``beta = theta = 0`` negative Hessian."""
        return self.design.T @ self.design / self.n

    def neg_hessian_min_eig(self, v) -> float:
        return float(scipy.linalg.eigvalsh(self.neg_hessian(v))[0])


def lpl(g: WeightedHypergraph, x, p: ModelParameters, y) -> float:
    return LplObjective(g, x, y).value(p.as_vector())


def lpl_gradient(g: WeightedHypergraph, x, p: ModelParameters, y) -> np.ndarray:
    return LplObjective(g, x, y).gradient(p.as_vector())


def lpl_neg_hessian(g: WeightedHypergraph, x, p: ModelParameters, y) -> np.ndarray:
    return LplObjective(g, x, y).neg_hessian(p.as_vector())


def lpl_evaluate(g: WeightedHypergraph, x, p: ModelParameters, y,
                 hessian: bool = False) -> LplEvaluation:
    obj = LplObjective(g, x, y)
    v = p.as_vector()
    value, grad = obj.value_and_gradient(v)
    eig = obj.neg_hessian_min_eig(v) if hessian else None
    return LplEvaluation(value, grad, eig)


class SandwichResult(NamedTuple):
    lhs_ok: bool
    rhs_ok: bool
    lambda_min: float


def sandwich_check(g: WeightedHypergraph, x, p: ModelParameters, y, box: ParameterBox,
                   tol: float = -1e-9) -> SandwichResult:
    """Check ``sech^2(B + M Theta) G <= -H <= G`` in the PSD order, ``G = (1/n) sum X_i X_i^T``.

    Each side is decided by the smallest eigenvalue of the difference matrix
    compared with ``tol``.
    """
    if not box.contains(p):
        raise OutOfBox(f"parameters (|beta|={abs(p.beta):.4g}, "
                       f"||theta||={np.linalg.norm(p.theta):.4g}) outside the box")
    obj = LplObjective(g, x, y)
    v = p.as_vector()
    neg_h = obj.neg_hessian(v)
    gram = obj.gram()
    floor = float(sech2(box.field_bound))
    lhs = scipy.linalg.eigvalsh(neg_h - floor * gram)[0]
    rhs = scipy.linalg.eigvalsh(gram - neg_h)[0]
    return SandwichResult(bool(lhs >= tol), bool(rhs >= tol),
                          float(scipy.linalg.eigvalsh(neg_h)[0]))
