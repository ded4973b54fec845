"""Projected gradient ascent on the log-pseudolikelihood over the parameter box."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFinite, OutOfBox
from .hypergraph import WeightedHypergraph
from .model import ModelParameters, ParameterBox
from .pseudolikelihood import LplObjective

__all__ = ["PgdConfig", "EstimationReport", "project_box", "project_vector", "estimate_mple"]


@dataclass(frozen=True)
class PgdConfig:
    """Step size, stopping threshold and iteration cap.

    ``None`` fields take their defaults once ``n`` is known:
    ``step_size = 1/(M^2+1)``, ``grad_tol = 1/sqrt(n)`` and
    ``max_iters = max(1000, 10 (M^2+1) ln(n) / rate_constant)``.
    """

    box: ParameterBox
    step_size: float | None = None
    grad_tol: float | None = None
    max_iters: int | None = None
    rate_constant: float = 0.01
    record_trajectory: bool = False

    def __post_init__(self):
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.rate_constant > 0:
            raise ValueError("rate_constant must be positive")

    def resolved(self, n: int) -> tuple[float, float, int]:
        L = self.box.smoothness
        step = self.step_size if self.step_size is not None else 1.0 / L
        tol = self.grad_tol if self.grad_tol is not None else 1.0 / math.sqrt(n)
        if self.max_iters is not None:
            cap = self.max_iters
        else:
            cap = max(1000, math.ceil(10 * L * math.log(max(n, 2)) / self.rate_constant))
        return step, tol, cap


@dataclass
class EstimationReport:
    """Outcome of one PGD run.

    ``final_grad_norm`` is the norm of the projected-gradient step
    ``(project(p + eta g) - p) / eta`` at the estimate; it equals
    ``||grad LPL||`` whenever that step stays inside the box. The raw
    gradient norm is kept in ``raw_grad_norm``.
    """

    estimate: ModelParameters
    iterations: int
    final_grad_norm: float
    converged: bool
    raw_grad_norm: float
    lpl_value: float
    step_size: float
    grad_tol: float
    max_iters: int
    trajectory: list[tuple[int, float, float]] | None = None
    iterates: list[np.ndarray] | None = field(default=None, repr=False)


def project_vector(v: np.ndarray, box: ParameterBox) -> np.ndarray:
    out = np.array(v, dtype=np.float64)
    out[-1] = min(max(out[-1], -box.beta_bound), box.beta_bound)
    norm = float(np.linalg.norm(out[:-1]))
    if norm > box.theta_bound:
        out[:-1] *= box.theta_bound / norm
    return out


def project_box(p: ModelParameters, box: ParameterBox) -> ModelParameters:
    """Clamp ``beta`` to ``[-B, B]`` and radially shrink ``theta`` onto the ``Theta`` ball."""
    if not box.contains(p, tol=0.0):
        return ModelParameters.from_vector(project_vector(p.as_vector(), box))
    return p


def estimate_mple(g: WeightedHypergraph, x, y, cfg: PgdConfig,
                  init: ModelParameters | None = None) -> EstimationReport:
    """Maximum pseudolikelihood estimate by projected gradient ascent.

    Iterates ``p <- project(p + eta * grad LPL(p))`` from ``init`` (zeros by
    default) until the projected-gradient norm falls to ``grad_tol`` or
    ``max_iters`` updates have been made.
    """
    obj = LplObjective(g, x, y)
    box = cfg.box
    init = ModelParameters.zeros(obj.d) if init is None else init
    if init.d != obj.d:
        raise DimensionMismatch(f"init has d={init.d}, covariates have d={obj.d}")
    if not box.contains(init):
        raise OutOfBox("initial point outside the box")
    step, tol, cap = cfg.resolved(obj.n)

    v = project_vector(init.as_vector(), box)
    trajectory = [] if cfg.record_trajectory else None
    iterates = [v.copy()] if cfg.record_trajectory else None
    it = 0
    while True:
        value, grad = obj.value_and_gradient(v)
        if not (np.all(np.isfinite(grad)) and math.isfinite(value)):
            raise NonFinite(f"non-finite gradient at iteration {it}")
        nxt = project_vector(v + step * grad, box)
        stationarity = float(np.linalg.norm(nxt - v)) / step
        if trajectory is not None:
            trajectory.append((it, value, stationarity))
        if stationarity <= tol or it >= cap:
            break
        v = nxt
        it += 1
        if iterates is not None:
            iterates.append(v.copy())

    return EstimationReport(
        estimate=ModelParameters.from_vector(v),
        iterations=it,
        final_grad_norm=stationarity,
        converged=stationarity <= tol,
        raw_grad_norm=float(np.linalg.norm(grad)),
        lpl_value=value,
        step_size=step,
        grad_tol=tol,
        max_iters=cap,
        trajectory=trajectory,
        iterates=iterates,
    )
