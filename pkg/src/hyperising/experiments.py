"""Synthetic instance generation, the estimation sweep, and a small-n MLE oracle.

Seeds are derived hierarchically: ``SeedSequence(master_seed, spawn_key=(n, trial))``
feeds one child stream per stage (hypergraph, covariates, truth, sampler), so a
cell's randomness does not depend on which other cells run.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .covariates import covariance_spectrum
from .diagnostics import validate_assumptions
from .errors import GenerationFailed, HyperisingError, TooLarge
from .hypergraph import WeightedHypergraph, normalize_degrees
from .model import ENUMERATION_CAP, ModelParameters, ParameterBox, as_spins, \
    enumerate_statistics
from .optimizer import PgdConfig, estimate_mple
from .sampler import RNG_NAME, ChainConfig, make_rng, sample_exact, sample_glauber

__all__ = [
    "FAMILIES",
    "ExperimentSpec",
    "SweepRow",
    "SweepResult",
    "parse_experiment_spec",
    "read_experiment_spec",
    "cell_seed",
    "generate_instance",
    "run_trial",
    "run_sweep",
    "write_sweep",
    "mle_oracle",
]

FAMILIES = ("random_uniform_m", "group_blocks", "pairwise")


@dataclass(frozen=True)
class ExperimentSpec:
    family: str
    n_values: tuple[int, ...]
    d: int
    m: int
    box: ParameterBox
    truth_draw: str = "uniform"
    theta0: tuple[float, ...] | None = None
    beta0: float | None = None
    trials_per_n: int = 50
    master_seed: int = 0
    sampler: str = "glauber"
    burn_in_sweeps: int = 200
    scan_order: str = "sequential"
    edges_per_vertex: int = 3
    weight_scale: float = 1.0
    degree_cap: float = 1.0
    mass_floor: float = 0.01
    spectrum_floor: float = 0.1
    generation_retries: int = 20
    grad_tol: float | None = None
    slope_min: float = -0.65
    slope_max: float = -0.35
    iteration_slack: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        ns = tuple(int(v) for v in self.n_values)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n_values must be non-empty and strictly increasing")
        if ns[0] < self.m:
            raise ValueError("every n must be at least m")
        object.__setattr__(self, "n_values", ns)
        if self.trials_per_n < 1:
            raise ValueError("trials_per_n must be >= 1")
        if self.d < 1 or self.m < 2:
            raise ValueError("need d >= 1 and m >= 2")
        if self.family == "pairwise" and self.m != 2:
            raise ValueError("the pairwise family needs m = 2")
        if self.truth_draw not in ("fixed", "uniform"):
            raise ValueError("truth_draw must be 'fixed' or 'uniform'")
        if self.truth_draw == "fixed":
            if self.theta0 is None or self.beta0 is None:
                raise ValueError("a fixed truth needs theta0 and beta0")
            if len(self.theta0) != self.d:
                raise ValueError(f"theta0 has {len(self.theta0)} entries, d={self.d}")
            if not self.box.contains(ModelParameters(np.array(self.theta0), self.beta0),
                                     strict=True):
                raise ValueError("fixed truth must lie strictly inside the box")
        if self.sampler not in ("exact", "glauber"):
            raise ValueError("sampler must be 'exact' or 'glauber'")
        if self.sampler == "exact" and ns[-1] > ENUMERATION_CAP:
            raise ValueError(f"exact sampling needs n <= {ENUMERATION_CAP}")
        if self.edges_per_vertex < 1:
            raise ValueError("edges_per_vertex must be >= 1")

    def chain(self, seed: int) -> ChainConfig:
        return ChainConfig(seed=seed, burn_in_sweeps=self.burn_in_sweeps,
                           scan_order=self.scan_order)


_INT_KEYS = ("d", "m", "trials_per_n", "master_seed", "burn_in_sweeps", "edges_per_vertex",
             "generation_retries", "workers")
_FLOAT_KEYS = ("weight_scale", "degree_cap", "mass_floor", "spectrum_floor", "grad_tol",
               "slope_min", "slope_max", "iteration_slack", "beta0")


def parse_experiment_spec(text: str) -> ExperimentSpec:
    """Parse ``key = value`` lines (an optional ``[experiment]`` header is allowed).

    The box is given by ``B``, ``Theta`` and ``M``; list values are separated
    by commas or whitespace.
    """
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    cp.read_string(text)
    if "experiment" not in cp:
        raise ValueError("missing [experiment] section")
    raw = dict(cp["experiment"])

    def floats(s):
        return tuple(float(t) for t in s.replace(",", " ").split())

    try:
        box = ParameterBox(float(raw.pop("B")), float(raw.pop("Theta")), float(raw.pop("M")))
        kw: dict = {"box": box, "family": raw.pop("family"),
                    "n_values": tuple(int(v) for v in floats(raw.pop("n_values")))}
    except KeyError as exc:
        raise ValueError(f"missing key {exc}") from None
    for key, value in raw.items():
        if key in _INT_KEYS:
            kw[key] = int(value)
        elif key in _FLOAT_KEYS:
            kw[key] = float(value)
        elif key == "theta0":
            kw[key] = floats(value)
        elif key in ("truth_draw", "sampler", "scan_order"):
            kw[key] = value
        else:
            raise ValueError(f"unknown key {key!r}")
    return ExperimentSpec(**kw)


def read_experiment_spec(path: str | Path) -> ExperimentSpec:
    return parse_experiment_spec(Path(path).read_text())


def format_experiment_spec(spec: ExperimentSpec) -> str:
    out = []
    for key, value in asdict(spec).items():
        if key == "box":
            out += [f"B = {spec.box.beta_bound!r}", f"Theta = {spec.box.theta_bound!r}",
                    f"M = {spec.box.feature_bound!r}"]
        elif value is None:
            continue
        elif isinstance(value, (tuple, list)):
            out.append(f"{key} = " + ", ".join(repr(v) for v in value))
        else:
            out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"


# -- generation ---------------------------------------------------------------------------


def cell_seed(master_seed: int, n: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(n), int(trial)))


def _partition_edges(rng, n, size, rounds):
    """Vertex sets from ``rounds`` random partitions into blocks of ``size``."""
    seen = set()
    for _ in range(rounds):
        perm = rng.permutation(n)
        for start in range(0, n - size + 1, size):
            key = tuple(sorted(int(v) for v in perm[start:start + size]))
            if key not in seen:
                seen.add(key)
                yield key


def _signed(rng, scale):
    return float(scale * rng.choice([-1.0, 1.0]))


def _hypergraph(spec: ExperimentSpec, n: int, rng) -> WeightedHypergraph:
    k, s, m = spec.edges_per_vertex, spec.weight_scale, spec.m
    if spec.family == "pairwise":
        edges = [(e, _signed(rng, s)) for e in _partition_edges(rng, n, 2, k)]
    elif spec.family == "random_uniform_m":
        edges = [(e, _signed(rng, s)) for e in _partition_edges(rng, n, m, k)]
    else:
        # one top edge per block of m consecutive (shuffled) vertices, plus a ring of pairs
        edges = [(e, _signed(rng, s)) for e in _partition_edges(rng, n, m, 1)]
        ring = rng.permutation(n)
        pairs = {tuple(sorted((int(ring[i]), int(ring[(i + 1) % n])))) for i in range(n)}
        pairs = {p for p in pairs if p[0] != p[1]}
        edges += [(p, _signed(rng, 0.5 * s)) for p in sorted(pairs)]
    return normalize_degrees(WeightedHypergraph(n, m, edges), spec.degree_cap)


def _covariates(spec: ExperimentSpec, n: int, rng) -> np.ndarray:
    for _ in range(spec.generation_retries):
        x = rng.standard_normal((n, spec.d))
        norms = np.linalg.norm(x, axis=1)
        over = norms > spec.box.feature_bound
        x[over] *= (spec.box.feature_bound / norms[over])[:, None]
        if n >= spec.d and covariance_spectrum(x)[0] >= spec.spectrum_floor:
            return x
    raise GenerationFailed(f"no well-conditioned covariates after {spec.generation_retries} "
                           f"draws (n={n}, d={spec.d}, M={spec.box.feature_bound})")


def _truth(spec: ExperimentSpec, rng) -> ModelParameters:
    if spec.truth_draw == "fixed":
        return ModelParameters(np.array(spec.theta0), spec.beta0)
    radius = 0.8 * spec.box.theta_bound
    direction = rng.standard_normal(spec.d)
    direction /= np.linalg.norm(direction)
    r = radius * rng.random() ** (1.0 / spec.d)
    beta = rng.uniform(-0.8 * spec.box.beta_bound, 0.8 * spec.box.beta_bound)
    return ModelParameters(r * direction, beta)


def generate_instance(spec: ExperimentSpec, n: int, trial_seed) -> tuple[
        WeightedHypergraph, np.ndarray, ModelParameters]:
    """Hypergraph, covariates and truth for one cell; deterministic in ``trial_seed``.

    ``trial_seed`` is an integer or a ``SeedSequence``.
    """
    ss = trial_seed if isinstance(trial_seed, np.random.SeedSequence) \
        else np.random.SeedSequence(int(trial_seed))
    g_ss, x_ss, t_ss = (_stage(ss, k) for k in range(3))
    g = _hypergraph(spec, n, make_rng(g_ss))
    x = _covariates(spec, n, make_rng(x_ss))
    return g, x, _truth(spec, make_rng(t_ss))


def _stage(ss: np.random.SeedSequence, k: int) -> np.random.SeedSequence:
    """Child stream ``k`` of a cell, independent of spawn state."""
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (k,))


def _sampler_seed(ss: np.random.SeedSequence) -> int:
    return int(_stage(ss, 3).generate_state(1, np.uint64)[0])


# -- sweep --------------------------------------------------------------------------------


@dataclass
class SweepRow:
    n: int
    trial: int
    error: float
    iterations: int
    grad_norm: float
    converged: bool
    degree_ok: bool
    mass_ok: bool
    spectrum_ok: bool
    row_norm_ok: bool
    box_ok: bool
    beta0: float
    beta_hat: float
    theta_error: float
    seconds: float
    failure: str = ""

    @property
    def flagged(self) -> bool:
        return bool(self.failure) or not (self.degree_ok and self.mass_ok and self.spectrum_ok
                                          and self.row_norm_ok and self.box_ok)


def run_trial(spec: ExperimentSpec, n: int, trial: int) -> tuple[SweepRow, dict]:
    """Generate, sample once, estimate and check assumptions for one cell."""
    ss = cell_seed(spec.master_seed, n, trial)
    t0 = time.perf_counter()
    nan = math.nan
    try:
        g, x, truth = generate_instance(spec, n, ss)
        seed = _sampler_seed(ss)
        if spec.sampler == "exact":
            y = sample_exact(g, x, truth, seed)
        else:
            y = sample_glauber(g, x, truth, spec.chain(seed))
        rep = validate_assumptions(g, x, spec.box, truth, cap=spec.degree_cap,
                                   mass_floor=spec.mass_floor,
                                   spectrum_floor=spec.spectrum_floor,
                                   with_projection=n <= 1000)
        est = estimate_mple(g, x, y, PgdConfig(spec.box, grad_tol=spec.grad_tol))
    except HyperisingError as exc:
        row = SweepRow(n, trial, nan, 0, nan, False, False, False, False, False, False, nan,
                       nan, nan, time.perf_counter() - t0, failure=f"{type(exc).__name__}: {exc}")
        return row, {"failure": row.failure}
    diff = est.estimate.as_vector() - truth.as_vector()
    row = SweepRow(
        n=n, trial=trial,
        error=float(np.linalg.norm(diff)),
        iterations=est.iterations,
        grad_norm=est.final_grad_norm,
        converged=est.converged,
        degree_ok=rep.degree_ok, mass_ok=rep.mass_ok, spectrum_ok=rep.spectrum_ok,
        row_norm_ok=rep.row_norm_ok, box_ok=bool(rep.box_ok),
        beta0=truth.beta, beta_hat=est.estimate.beta,
        theta_error=float(np.linalg.norm(diff[:-1])),
        seconds=time.perf_counter() - t0,
    )
    report = rep.as_dict()
    report.update(theta0=truth.theta.tolist(), beta0=truth.beta,
                  theta_hat=est.estimate.theta.tolist(), beta_hat=est.estimate.beta,
                  iterations=est.iterations, converged=est.converged,
                  sampler=spec.sampler, sampler_seed=seed)
    return row, report


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slope: float
    intercept: float
    median_error: dict[int, float]
    used_per_n: dict[int, int]
    iteration_growth: float
    iteration_ok: bool
    metadata: dict = field(default_factory=dict)
    reports: dict[tuple[int, int], dict] = field(default_factory=dict, repr=False)

    def slope_ok(self, lo: float, hi: float) -> bool:
        return math.isfinite(self.slope) and lo <= self.slope <= hi

    @property
    def flagged(self) -> list[SweepRow]:
        return [r for r in self.rows if r.flagged]


def _fit_line(xs, ys) -> tuple[float, float]:
    if len(xs) < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(np.asarray(xs, float), np.asarray(ys, float), 1)
    return float(slope), float(intercept)


def _summarize(spec: ExperimentSpec, rows: list[SweepRow]):
    medians, used, max_iters = {}, {}, {}
    for n in spec.n_values:
        good = [r for r in rows if r.n == n and not r.flagged]
        used[n] = len(good)
        if good:
            medians[n] = float(np.median([r.error for r in good]))
            max_iters[n] = max(r.iterations for r in good)
    ns = [n for n in spec.n_values if n in medians and medians[n] > 0]
    slope, intercept = _fit_line(np.log(ns), np.log([medians[n] for n in ns]))
    # Iteration growth: fit c on (ln n, per-n max iterations); the largest n must not
    # exceed the smallest by more than c * ln(ratio) plus a relative slack.
    it_ns = sorted(max_iters)
    c, _ = _fit_line(np.log(it_ns), [max_iters[n] for n in it_ns])
    if len(it_ns) >= 2:
        lo, hi = it_ns[0], it_ns[-1]
        allowed = max_iters[lo] + max(c, 0.0) * math.log(hi / lo) \
            + spec.iteration_slack * max_iters[lo]
        it_ok = max_iters[hi] <= allowed
    else:
        it_ok = True
    return slope, intercept, medians, used, c, it_ok


def run_sweep(spec: ExperimentSpec, keep_reports: bool = False) -> SweepResult:
    """Run every ``(n, trial)`` cell and fit ``log(median error)`` against ``log n``.

    Failed cells are recorded with a ``failure`` message; they and cells whose
    assumptions fail are excluded from the fits.
    """
    cells = [(n, t) for n in spec.n_values for t in range(spec.trials_per_n)]
    t0 = time.perf_counter()
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            futures = [pool.submit(run_trial, spec, n, t) for n, t in cells]
            results = [f.result() for f in futures]
    else:
        results = [run_trial(spec, n, t) for n, t in cells]
    rows = [r for r, _ in results]
    slope, intercept, medians, used, c, it_ok = _summarize(spec, rows)
    meta = {
        "rng": RNG_NAME,
        "seed_derivation": "SeedSequence(master_seed, spawn_key=(n, trial, stage))",
        "master_seed": spec.master_seed,
        "sampler": spec.sampler if spec.sampler == "exact" else
        f"glauber(burn_in={spec.burn_in_sweeps}, scan={spec.scan_order})",
        "mixing_note": "glauber burn-in adequacy is not certified" if spec.sampler == "glauber"
        else "exact",
        "seconds": round(time.perf_counter() - t0, 3),
    }
    reports = {(r.n, r.trial): rep for r, rep in results} if keep_reports else {}
    return SweepResult(rows, slope, intercept, medians, used, c, it_ok, meta, reports)


def write_sweep(result: SweepResult, spec: ExperimentSpec, out: str | Path) -> None:
    """``rows.csv``, ``summary.txt`` and ``reports/n<n>_t<trial>.txt`` under ``out``."""
    out = Path(out)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    names = [f for f in SweepRow.__dataclass_fields__] + ["flagged"]
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(names)
    for r in result.rows:
        w.writerow([getattr(r, k) for k in names])
    (out / "rows.csv").write_text(buf.getvalue())
    lines = [
        f"family = {spec.family}",
        f"n_values = {' '.join(map(str, spec.n_values))}",
        f"d = {spec.d}",
        f"m = {spec.m}",
        f"trials_per_n = {spec.trials_per_n}",
        f"slope = {result.slope!r}",
        f"intercept = {result.intercept!r}",
        f"slope_ok = {result.slope_ok(spec.slope_min, spec.slope_max)}",
        f"slope_range = {spec.slope_min} {spec.slope_max}",
        f"iteration_growth = {result.iteration_growth!r}",
        f"iteration_ok = {result.iteration_ok}",
        f"flagged_rows = {len(result.flagged)}",
    ]
    for n in spec.n_values:
        lines.append(f"median_error[{n}] = {result.median_error.get(n, math.nan)!r}")
        lines.append(f"rows_used[{n}] = {result.used_per_n.get(n, 0)}")
    lines += [f"{k} = {v}" for k, v in result.metadata.items()]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for (n, t), rep in result.reports.items():
        body = "\n".join(f"{k} = {v}" for k, v in rep.items())
        (out / "reports" / f"n{n}_t{t}.txt").write_text(body + "\n")


# -- MLE oracle ---------------------------------------------------------------------------


def _grid(box: ParameterBox, d: int, step: float) -> np.ndarray:
    """Grid points ``(theta, beta)`` inside the box, centered on the origin."""
    def axis(bound):
        k = int(math.floor(bound / step + 1e-9))
        return step * np.arange(-k, k + 1)
    axes = [axis(box.theta_bound)] * d + [axis(box.beta_bound)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d + 1)
    keep = np.linalg.norm(pts[:, :d], axis=1) <= box.theta_bound + 1e-12
    return pts[keep]


def mle_oracle(g: WeightedHypergraph, x, y, box: ParameterBox, grid_step: float,
               cap: int = ENUMERATION_CAP, chunk: int = 4096) -> ModelParameters:
    """Exact-likelihood maximizer over a grid in the box (small n, d <= 2 only).

    Ties go to the grid point closest to the origin.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    d = x.shape[1]
    if d > 2:
        raise TooLarge(f"grid oracle supports d <= 2, got {d}")
    if g.n > cap:
        raise TooLarge(f"n={g.n} exceeds the enumeration cap {cap}")
    y = as_spins(y, g.n)
    table = enumerate_statistics(g, x, cap)
    code = int(((y > 0).astype(np.int64) << np.arange(g.n)).sum())
    obs = table[code]
    pts = _grid(box, d, grid_step)
    best_val, best_pt = -math.inf, None
    for start in range(0, len(pts), chunk):
        block = pts[start:start + chunk]
        ll = block @ obs - logsumexp(table @ block.T, axis=0)
        order = np.lexsort((np.linalg.norm(block, axis=1), -ll))
        k = order[0]
        if ll[k] > best_val + 1e-12 or (abs(ll[k] - best_val) <= 1e-12
                                        and np.linalg.norm(block[k]) < np.linalg.norm(best_pt)):
            best_val, best_pt = float(ll[k]), block[k]
    return ModelParameters.from_vector(best_pt)


def with_overrides(spec: ExperimentSpec, **kw) -> ExperimentSpec:
    return replace(spec, **kw)
