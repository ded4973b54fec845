"""Feature matrix X: spectrum checks and the residual projector F."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, IllConditioned

__all__ = [
    "ProjectionMatrix",
    "as_covariates",
    "row_norms_ok",
    "covariance_spectrum",
    "build_projection",
    "read_covariates",
    "write_covariates",
]


def as_covariates(x, n: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a finite float ``(n, d)`` array."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] < 1:
        raise DimensionMismatch(f"covariates must be an (n, d) matrix, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise DimensionMismatch(f"covariates have {x.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("covariates contain non-finite entries")
    return x


def row_norms_ok(x: np.ndarray, bound: float) -> bool:
    """True when every feature vector has Euclidean norm at most ``bound``."""
    return bool(np.max(np.linalg.norm(x, axis=1)) <= bound * (1 + 1e-12))


def covariance_spectrum(x: np.ndarray) -> tuple[float, float]:
    """Extreme eigenvalues of ``Q = X^T X / n``."""
    x = as_covariates(x)
    n, d = x.shape
    if n < d:
        raise DimensionMismatch(f"need n >= d, got n={n}, d={d}")
    q = x.T @ x / n
    try:
        eig = scipy.linalg.eigvalsh(q)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise IllConditioned(f"eigen-solve failed: {exc}") from exc
    return float(eig[0]), float(eig[-1])


@dataclass(frozen=True)
class ProjectionMatrix:
    """``F = I - X (X^T X)^{-1} X^T`` together with its max column sum."""

    f: np.ndarray
    inf_norm: float

    @property
    def norm_ok(self) -> bool:
        return self.inf_norm <= 1.0 + 1e-12


def build_projection(x: np.ndarray, cond_tol: float | None = None) -> ProjectionMatrix:
    """Dense residual projector onto the orthogonal complement of col(X).

    ``cond_tol`` is a floor on ``lambda_min(X^T X / n)``; the default is
    ``1e-10 * lambda_max``. ``||F||_inf > 1`` only triggers a warning.
    """
    x = as_covariates(x)
    n, d = x.shape
    lo, hi = covariance_spectrum(x)
    tol = 1e-10 * hi if cond_tol is None else cond_tol
    if not lo >= tol or hi <= 0:
        raise IllConditioned(f"lambda_min(X^T X / n) = {lo:.3e} below tolerance {tol:.3e}")
    try:
        chol = scipy.linalg.cho_factor(x.T @ x)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(str(exc)) from exc
    hat = x @ scipy.linalg.cho_solve(chol, x.T)
    f = np.eye(n) - hat
    f = 0.5 * (f + f.T)
    inf_norm = float(np.abs(f).sum(axis=0).max())
    if inf_norm > 1.0 + 1e-12:
        warnings.warn(f"||F||_inf = {inf_norm:.4f} exceeds 1", RuntimeWarning, stacklevel=2)
    return ProjectionMatrix(f=f, inf_norm=inf_norm)


def read_covariates(path: str | Path, n: int | None = None) -> np.ndarray:
    """Read a CSV of feature rows; a non-numeric first row is treated as a header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    try:
        x = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if x.size == 0:
        raise DimensionMismatch(f"{path}: no covariate rows")
    return as_covariates(x, n)


def write_covariates(x: np.ndarray, path: str | Path) -> None:
    x = as_covariates(x)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{k}" for k in range(x.shape[1])])
        w.writerows([[repr(v) for v in row] for row in x.tolist()])
