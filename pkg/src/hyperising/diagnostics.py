"""Assumption checks and the strong-concavity certificate machinery.

The certificate chain is: reduction matrix ``A`` built from the top-cardinality
edge weights, product ``F A`` with the residual projector, a greedy bijection
``h`` over ``F A``, and the lower bound

    c_m * sum_i (F A)_{i, h(i)}^2,    c_m = exp(-(B + M Theta)(m - 1)) / 2^(m - 1)

on the summed conditional energies ``sum_i E[(F f)_i^2 | y_{-h(i)}]``. The
Monte-Carlo and exact-enumeration checks below test the stated conclusions of
the supporting bounds on concrete instances.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .covariates import as_covariates, build_projection, covariance_spectrum
from .errors import DimensionMismatch, NoTopEdges
from .hypergraph import WeightedHypergraph, top_mass
from .model import ENUMERATION_CAP, ModelParameters, ParameterBox, _check_dims, local_fields, \
    spins_from_codes
from .sampler import ChainConfig, exact_distribution, sample_exact, sample_glauber

__all__ = [
    "AssumptionReport",
    "ReductionMatrix",
    "SelectionMap",
    "ConcavityAnalysis",
    "VarianceCheck",
    "EnergyCheck",
    "ConditionalCheck",
    "validate_assumptions",
    "build_reduction_matrix",
    "index_selection",
    "concavity_factor",
    "concavity_analysis",
    "concavity_lower_bound",
    "draw_samples",
    "verify_gradient_variance",
    "verify_energy_lower_bound",
    "parity_check",
    "tower_property_check",
]


# -- assumptions ------------------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionReport:
    max_degree: float
    degree_cap: float
    degree_ok: bool
    top_mass: float
    mass_ratio: float
    mass_floor: float
    mass_ok: bool
    lambda_min_q: float
    lambda_max_q: float
    spectrum_floor: float
    spectrum_ok: bool
    max_row_norm: float
    row_norm_ok: bool
    f_inf_norm: float | None
    f_norm_ok: bool | None
    box_ok: bool | None

    @property
    def all_ok(self) -> bool:
        """Every hard assumption holds (the ``||F||_inf`` check is warning-level)."""
        hard = [self.degree_ok, self.mass_ok, self.spectrum_ok, self.row_norm_ok]
        if self.box_ok is not None:
            hard.append(self.box_ok)
        return all(hard)

    def as_dict(self) -> dict:
        out = dict(self.__dict__)
        out["all_ok"] = self.all_ok
        return out


def validate_assumptions(g: WeightedHypergraph, x, box: ParameterBox,
                         truth: ModelParameters | None = None, cap: float = 1.0,
                         mass_floor: float = 0.01, spectrum_floor: float = 0.1,
                         with_projection: bool = True) -> AssumptionReport:
    """Measure every assumption; violations are reported, never raised."""
    x = as_covariates(x, g.n)
    if truth is not None and truth.d != x.shape[1]:
        raise DimensionMismatch(f"truth has d={truth.d}, covariates have {x.shape[1]} columns")
    max_degree = float(g.degrees().max()) if g.num_edges else 0.0
    mass = top_mass(g)
    lo, hi = covariance_spectrum(x)
    row_max = float(np.linalg.norm(x, axis=1).max())
    f_norm = f_ok = None
    if with_projection:
        try:
            proj = _projection_quiet(x)
            f_norm, f_ok = proj.inf_norm, proj.norm_ok
        except ValueError:
            f_norm, f_ok = math.inf, False
    return AssumptionReport(
        max_degree=max_degree,
        degree_cap=cap,
        degree_ok=max_degree <= cap * (1 + 1e-12),
        top_mass=mass,
        mass_ratio=mass / g.n,
        mass_floor=mass_floor,
        mass_ok=mass / g.n >= mass_floor,
        lambda_min_q=lo,
        lambda_max_q=hi,
        spectrum_floor=spectrum_floor,
        spectrum_ok=lo >= spectrum_floor,
        max_row_norm=row_max,
        row_norm_ok=row_max <= box.feature_bound * (1 + 1e-12),
        f_inf_norm=f_norm,
        f_norm_ok=f_ok,
        box_ok=None if truth is None else box.contains(truth, strict=True),
    )


def _projection_quiet(x, cond_tol=None):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return build_projection(x, cond_tol)


# -- reduction matrix and index selection -------------------------------------------------


@dataclass(frozen=True)
class ReductionMatrix:
    """Pairwise matrix extracted from the top-cardinality edges.

    Column ``i`` holds ``w_{z* ∪ {i, j}}`` in row ``j``, for the
    ``(m-2)``-tuple ``z*`` whose weight vector has the largest norm.
    ``inf_norm`` is the largest column absolute sum, ``one_norm`` the largest
    row absolute sum.
    """

    a: np.ndarray
    chosen_tuples: tuple[tuple[int, ...] | None, ...]
    frobenius_sq: float
    inf_norm: float
    one_norm: float


def build_reduction_matrix(g: WeightedHypergraph) -> ReductionMatrix:
    top = g.top_edges()
    if not top:
        raise NoTopEdges(f"no edge of cardinality m={g.m}")
    n = g.n
    # column i -> tuple z -> list of (row j, weight)
    candidates: list[dict[tuple[int, ...], list[tuple[int, float]]]] = [
        defaultdict(list) for _ in range(n)]
    for k in top:
        e, w = g.edges[k], float(g.weights[k])
        for i in e:
            for j in e:
                if j != i:
                    z = tuple(v for v in e if v != i and v != j)
                    candidates[i][z].append((j, w))
    a = np.zeros((n, n))
    chosen: list[tuple[int, ...] | None] = []
    for i in range(n):
        best_z, best_sq = None, -1.0
        for z in sorted(candidates[i]):
            sq = math.fsum(w * w for _, w in candidates[i][z])
            if sq > best_sq:
                best_z, best_sq = z, sq
        chosen.append(best_z)
        if best_z is not None:
            for j, w in candidates[i][best_z]:
                a[j, i] = w
    absa = np.abs(a)
    return ReductionMatrix(
        a=a,
        chosen_tuples=tuple(chosen),
        frobenius_sq=float(np.sum(a * a)),
        inf_norm=float(absa.sum(axis=0).max()),
        one_norm=float(absa.sum(axis=1).max()),
    )


@dataclass(frozen=True)
class SelectionMap:
    h: np.ndarray
    selected_sq_sum: float

    def is_bijection(self) -> bool:
        return bool(np.array_equal(np.sort(self.h), np.arange(len(self.h))))


def index_selection(w) -> SelectionMap:
    """Greedy bijection: repeatedly take the unselected row of largest norm and its
    largest unselected entry, then zero that row and column.

    Ties go to the smallest index. Only rows and columns not yet selected are
    eligible, which keeps ``h`` a bijection once the remainder is all zero.
    """
    w = np.array(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionMismatch("index selection needs a square matrix")
    n = w.shape[0]
    work = w.copy()
    row_sq = np.einsum("ij,ij->i", work, work)
    # incremental norms drift by rounding; near-ties are re-decided on exact sums
    slack = 1e-9 * float(row_sq.max(initial=0.0))
    rows_left = np.ones(n, dtype=bool)
    cols_left = np.ones(n, dtype=bool)
    h = np.empty(n, dtype=np.int64)
    for _ in range(n):
        active = np.flatnonzero(rows_left)
        approx = row_sq[active]
        cand = active[approx >= approx.max() - slack]
        if len(cand) > 1:
            exact = [math.fsum(v * v for v in work[c].tolist()) for c in cand]
            top = max(exact)
            if top == 0.0:
                # the remainder is all zero: rows and columns pair off in index order
                h[active] = np.flatnonzero(cols_left)
                break
            i = int(cand[exact.index(top)])
        else:
            i = int(cand[0])
        j = int(np.argmax(np.where(cols_left, np.abs(work[i]), -np.inf)))
        h[i] = j
        rows_left[i] = False
        cols_left[j] = False
        row_sq -= work[:, j] ** 2
        work[:, j] = 0.0
        work[i, :] = 0.0
        row_sq[i] = 0.0
    selected = w[np.arange(n), h]
    return SelectionMap(h=h, selected_sq_sum=float(selected @ selected))


def concavity_factor(box: ParameterBox, m: int) -> float:
    """``exp(-(B + M Theta)(m - 1)) / 2^(m - 1)``."""
    return math.exp(-box.field_bound * (m - 1)) / 2.0 ** (m - 1)


@dataclass(frozen=True)
class ConcavityAnalysis:
    bound: float
    factor: float
    selection: SelectionMap
    reduction: ReductionMatrix
    fa_frobenius_sq: float
    fa_inf_norm: float
    projection_inf_norm: float

    @property
    def per_vertex(self) -> float:
        return self.bound / len(self.selection.h)

    def frobenius_gap_ok(self, d: int, m: int, cap: float = 1.0) -> bool:
        """``||FA||_F^2 >= ||A||_F^2 - d ((m-1) cap)^2``."""
        slack = d * ((m - 1) * cap) ** 2
        return self.fa_frobenius_sq >= self.reduction.frobenius_sq - slack - 1e-9


def concavity_analysis(g: WeightedHypergraph, x, box: ParameterBox,
                       cond_tol: float | None = None) -> ConcavityAnalysis:
    reduction = build_reduction_matrix(g)
    proj = _projection_quiet(as_covariates(x, g.n), cond_tol)
    fa = proj.f @ reduction.a
    sel = index_selection(fa)
    factor = concavity_factor(box, g.m)
    return ConcavityAnalysis(
        bound=factor * sel.selected_sq_sum,
        factor=factor,
        selection=sel,
        reduction=reduction,
        fa_frobenius_sq=float(np.sum(fa * fa)),
        fa_inf_norm=float(np.abs(fa).sum(axis=0).max()),
        projection_inf_norm=proj.inf_norm,
    )


def concavity_lower_bound(g: WeightedHypergraph, x, box: ParameterBox,
                          cond_tol: float | None = None) -> float:
    """Certified lower bound on ``sum_i E[(F f)_i^2 | y_{-h(i)}]``; divide by n per vertex."""
    return concavity_analysis(g, x, box, cond_tol).bound


# -- Monte-Carlo checks -------------------------------------------------------------------


def draw_samples(g: WeightedHypergraph, x, p: ModelParameters, trials: int, seed: int,
                 chain: ChainConfig | None = None) -> tuple[np.ndarray, str]:
    """``trials`` independent configurations: exact when enumerable, else Glauber chains."""
    if chain is None and g.n <= ENUMERATION_CAP:
        return sample_exact(g, x, p, seed, size=trials), "exact"
    cfg = chain or ChainConfig(seed=seed)
    ys = sample_glauber(g, x, p, cfg, chains=trials)
    return ys, f"glauber(burn_in={cfg.burn_in_sweeps}, scan={cfg.scan_order})"


@dataclass(frozen=True)
class VarianceCheck:
    empirical_beta_var: float
    bound_beta: float
    empirical_theta_var: float
    bound_theta: float
    trials: int
    method: str

    @property
    def holds(self) -> bool:
        return (self.empirical_beta_var <= self.bound_beta
                and self.empirical_theta_var <= self.bound_theta)


def verify_gradient_variance(g: WeightedHypergraph, x, truth: ModelParameters,
                             box: ParameterBox, trials: int, seed: int,
                             chain: ChainConfig | None = None) -> VarianceCheck:
    """Monte-Carlo second moments of ``n * grad LPL`` at the truth versus their bounds.

    Bounds: ``(12 + 4B)(m-1) n`` for the beta coordinate and
    ``(1 + B) 4 M^2 (m-1) d n`` summed over theta coordinates.
    """
    x = _check_dims(g, x, truth)
    ys, method = draw_samples(g, x, truth, trials, seed, chain)
    f = local_fields(g, ys)
    resid = ys - np.tanh(x @ truth.theta + truth.beta * f)
    beta_stat = np.sum(resid * f, axis=1) ** 2
    theta_stat = np.sum((resid @ x) ** 2, axis=1)
    n, d, m, B, M = g.n, x.shape[1], g.m, box.beta_bound, box.feature_bound
    return VarianceCheck(
        empirical_beta_var=float(beta_stat.mean()),
        bound_beta=(12 + 4 * B) * (m - 1) * n,
        empirical_theta_var=float(theta_stat.mean()),
        bound_theta=(1 + B) * 4 * M ** 2 * (m - 1) * d * n,
        trials=trials,
        method=method,
    )


@dataclass(frozen=True)
class EnergyCheck:
    empirical_min_ff: float
    fraction_above: float
    mean_ff: float
    bound: float | None
    trials: int
    method: str


def verify_energy_lower_bound(g: WeightedHypergraph, x, truth: ModelParameters,
                              box: ParameterBox, trials: int, seed: int,
                              cond_tol: float | None = None,
                              chain: ChainConfig | None = None) -> EnergyCheck:
    """Distribution of ``||F f(y)||^2`` over sampled ``y`` against the certified bound.

    Without top-cardinality edges no bound exists; ``fraction_above`` is then
    the fraction of samples with positive energy.
    """
    x = _check_dims(g, x, truth)
    proj = _projection_quiet(x, cond_tol)
    try:
        bound = concavity_lower_bound(g, x, box, cond_tol)
    except NoTopEdges:
        bound = None
    ys, method = draw_samples(g, x, truth, trials, seed, chain)
    ff = np.sum((local_fields(g, ys) @ proj.f) ** 2, axis=1)
    threshold = 0.0 if bound is None else bound
    return EnergyCheck(
        empirical_min_ff=float(ff.min()),
        fraction_above=float(np.mean(ff >= threshold)) if bound is not None
        else float(np.mean(ff > 0)),
        mean_ff=float(ff.mean()),
        bound=bound,
        trials=trials,
        method=method,
    )


# -- exact conditional checks -------------------------------------------------------------


@dataclass(frozen=True)
class ConditionalCheck:
    """Result of an exact check of ``E[(F f)_i^2 | ...] >= c_m a_i^2``.

    ``checked`` counts (vertex, tuple) pairs, ``violations`` those failing for
    at least one conditioning realization, and ``min_margin`` the smallest
    ``E - c_m a_i^2`` over all realizations.
    """

    checked: int
    violations: int
    min_margin: float
    worst: tuple | None


def _conditional_energies(g, x, truth, cond_tol, cap):
    x = _check_dims(g, x, truth)
    if g.n > cap:
        from .errors import TooLarge
        raise TooLarge(f"n={g.n} exceeds the exact-check cap {cap}")
    prob = exact_distribution(g, x, truth)
    codes = np.arange(1 << g.n)
    fvec = local_fields(g, spins_from_codes(codes, g.n))
    proj = _projection_quiet(x, cond_tol)
    energy = (fvec @ proj.f) ** 2
    return prob, codes, energy, proj.f


def _check_tuples(g, prob, codes, energy, fmat, factor, tuples, free_of):
    """Shared loop: for each tuple, condition on everything outside ``free_of(tuple)``."""
    checked = violations = 0
    min_margin, worst = math.inf, None
    for tup in tuples:
        free = free_of(tup)
        mask = 0
        for v in free:
            mask |= 1 << v
        key = codes & ~mask
        _, group = np.unique(key, return_inverse=True)
        mass = np.bincount(group, weights=prob)
        wz = np.zeros(g.n)
        for j in range(g.n):
            if j not in tup:
                wz[j] = g.weight_of((j,) + tuple(tup)) if len(tup) + 1 == g.m else 0.0
        a = fmat @ wz
        for i in range(g.n):
            cond = np.bincount(group, weights=prob * energy[:, i]) / mass
            margin = float(cond.min() - factor * a[i] ** 2)
            checked += 1
            if margin < -1e-12 * max(1.0, factor * a[i] ** 2):
                violations += 1
            if margin < min_margin:
                min_margin, worst = margin, (i, tuple(tup))
    return ConditionalCheck(checked, violations, min_margin, worst)


def _top_subtuples(g: WeightedHypergraph, size: int) -> list[tuple[int, ...]]:
    out = set()
    for k in g.top_edges():
        out.update(itertools.combinations(g.edges[k], size))
    return sorted(out)


def parity_check(g: WeightedHypergraph, x, truth: ModelParameters, box: ParameterBox,
                       cond_tol: float | None = None, cap: int = 12) -> ConditionalCheck:
    """Exact check that conditioning away the ``m-1`` spins of a top-edge tuple
    ``z`` keeps ``E[(F f)_i^2 | y_{-z}] >= c_m (sum_j F_ij w_{j,z})^2``.

    Every vertex ``i``, every ``(m-1)``-subset of a top edge, and every
    realization of the conditioned spins is enumerated.
    """
    if not g.top_edges():
        raise NoTopEdges(f"no edge of cardinality m={g.m}")
    prob, codes, energy, fmat = _conditional_energies(g, x, truth, cond_tol, cap)
    return _check_tuples(g, prob, codes, energy, fmat, concavity_factor(box, g.m),
                         _top_subtuples(g, g.m - 1), free_of=lambda tup: tup)


def tower_property_check(g: WeightedHypergraph, x, truth: ModelParameters, box: ParameterBox,
                         cond_tol: float | None = None, cap: int = 12) -> ConditionalCheck:
    """Single-spin variant: only the first vertex ``v`` of each ``(m-1)``-tuple
    ``(v, z_1..z_{m-2})`` is free, i.e. ``E[(F f)_i^2 | y_{-v}]``.
    """
    if not g.top_edges():
        raise NoTopEdges(f"no edge of cardinality m={g.m}")
    prob, codes, energy, fmat = _conditional_energies(g, x, truth, cond_tol, cap)
    tuples = []
    for tup in _top_subtuples(g, g.m - 1):
        for v in tup:
            tuples.append((v,) + tuple(u for u in tup if u != v))
    return _check_tuples(g, prob, codes, energy, fmat, concavity_factor(box, g.m),
                         tuples, free_of=lambda tup: tup[:1])
