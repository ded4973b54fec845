"""Command-line entry point: ``hyperising {generate,sample,estimate,diagnose,experiment}``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .covariates import read_covariates, write_covariates
from .diagnostics import concavity_analysis, validate_assumptions
from .errors import HyperisingError, NoTopEdges
from .experiments import generate_instance, cell_seed, read_experiment_spec, run_sweep, \
    write_sweep
from .hypergraph import read_hypergraph, write_hypergraph
from .model import ParameterBox, read_parameters, read_sample, write_parameters, write_sample
from .optimizer import PgdConfig, estimate_mple
from .sampler import RNG_NAME, ChainConfig, sample_exact, sample_glauber

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_NOT_CONVERGED = 2
EXIT_ERROR = 3


def _kv(pairs) -> str:
    def fmt(v):
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, (list, tuple, np.ndarray)):
            return " ".join(fmt(float(t)) if isinstance(t, (float, np.floating)) else str(t)
                            for t in v)
        return str(v)
    return "".join(f"{k} = {fmt(v)}\n" for k, v in pairs)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _box(args) -> ParameterBox:
    return ParameterBox(args.B, args.Theta, args.M)


def _add_model_files(p, params=True):
    p.add_argument("--hypergraph", required=True, help="hypergraph text file")
    p.add_argument("--covariates", required=True, help="covariate CSV, one row per vertex")
    if params:
        p.add_argument("--params", required=True, help="parameter file (theta = ..., beta = ...)")


def _add_box(p, required=True):
    p.add_argument("--B", type=float, required=required, help="bound on |beta|")
    p.add_argument("--Theta", type=float, required=required, help="bound on ||theta||_2")
    p.add_argument("--M", type=float, required=required, help="bound on ||x_i||_2")


def cmd_generate(args) -> int:
    spec = read_experiment_spec(args.spec)
    g, x, truth = generate_instance(spec, args.n, cell_seed(spec.master_seed, args.n,
                                                            args.trial))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_hypergraph(g, out / "hypergraph.txt")
    write_covariates(x, out / "covariates.csv")
    write_parameters(truth, out / "truth.txt")
    return EXIT_OK


def cmd_sample(args) -> int:
    g = read_hypergraph(args.hypergraph)
    x = read_covariates(args.covariates, g.n)
    p = read_parameters(args.params)
    chains = args.chains
    if args.exact:
        ys = sample_exact(g, x, p, args.seed, size=chains)
    else:
        cfg = ChainConfig(seed=args.seed, burn_in_sweeps=args.burn_in, scan_order=args.scan)
        ys = sample_glauber(g, x, p, cfg, chains=chains)
    out = Path(args.out)
    if chains is None:
        write_sample(ys, out, zero_one=args.zero_one)
    else:
        for k, y in enumerate(ys):
            write_sample(y, out.with_name(f"{out.stem}_{k}{out.suffix}"), zero_one=args.zero_one)
    method = "exact" if args.exact else f"glauber(burn_in={args.burn_in}, scan={args.scan})"
    sys.stderr.write(f"sampler = {method}\nrng = {RNG_NAME}\nseed = {args.seed}\n")
    return EXIT_OK


def cmd_estimate(args) -> int:
    g = read_hypergraph(args.hypergraph)
    x = read_covariates(args.covariates, g.n)
    y = read_sample(args.sample, g.n, zero_one=args.zero_one)
    cfg = PgdConfig(_box(args), step_size=args.step, grad_tol=args.tol,
                    max_iters=args.max_iters, record_trajectory=bool(args.trace))
    rep = estimate_mple(g, x, y, cfg)
    _emit(_kv([
        ("theta", rep.estimate.theta),
        ("beta", rep.estimate.beta),
        ("iterations", rep.iterations),
        ("final_grad_norm", rep.final_grad_norm),
        ("raw_grad_norm", rep.raw_grad_norm),
        ("converged", rep.converged),
        ("lpl", rep.lpl_value),
        ("step_size", rep.step_size),
        ("grad_tol", rep.grad_tol),
        ("max_iters", rep.max_iters),
    ]), args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lpl", "grad_norm"])
            w.writerows(rep.trajectory)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_diagnose(args) -> int:
    g = read_hypergraph(args.hypergraph)
    x = read_covariates(args.covariates, g.n)
    truth = read_parameters(args.params) if args.params else None
    box = _box(args)
    rep = validate_assumptions(g, x, box, truth, cap=args.cap, mass_floor=args.mass_floor,
                               spectrum_floor=args.spectrum_floor)
    pairs = list(rep.as_dict().items())
    if args.full:
        try:
            ca = concavity_analysis(g, x, box)
            pairs += [
                ("concavity_lower_bound", ca.bound),
                ("concavity_per_vertex", ca.per_vertex),
                ("concavity_factor", ca.factor),
                ("selected_sq_sum", ca.selection.selected_sq_sum),
                ("a_frobenius_sq", ca.reduction.frobenius_sq),
                ("a_inf_norm", ca.reduction.inf_norm),
                ("a_one_norm", ca.reduction.one_norm),
                ("fa_frobenius_sq", ca.fa_frobenius_sq),
                ("fa_inf_norm", ca.fa_inf_norm),
                ("frobenius_gap_ok", ca.frobenius_gap_ok(x.shape[1], g.m, args.cap)),
                ("h", ca.selection.h.tolist()),
            ]
        except NoTopEdges as exc:
            pairs.append(("concavity_lower_bound", f"unavailable ({exc})"))
    _emit(_kv(pairs), args.out)
    return EXIT_OK if rep.all_ok else EXIT_CHECK_FAILED


def cmd_experiment(args) -> int:
    spec = read_experiment_spec(args.spec)
    if args.workers:
        from dataclasses import replace
        spec = replace(spec, workers=args.workers)
    result = run_sweep(spec, keep_reports=True)
    write_sweep(result, spec, args.out)
    ok = result.slope_ok(spec.slope_min, spec.slope_max)
    sys.stdout.write((Path(args.out) / "summary.txt").read_text())
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperising", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write one synthetic instance")
    p.add_argument("--spec", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", help="draw a configuration")
    _add_model_files(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--scan", choices=("sequential", "random"), default="sequential")
    p.add_argument("--chains", type=int, default=None,
                   help="independent draws; written as <stem>_<k><suffix>")
    p.add_argument("--exact", action="store_true", help="inverse-CDF sampling (small n)")
    p.add_argument("--zero-one", action="store_true", help="write spins as 0/1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", help="maximum pseudolikelihood by projected gradient")
    _add_model_files(p, params=False)
    p.add_argument("--sample", required=True)
    p.add_argument("--zero-one", action="store_true", help="sample file uses 0/1")
    _add_box(p)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--trace", default=None, help="trajectory CSV path")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("diagnose", help="check assumptions and concavity certificate")
    _add_model_files(p, params=False)
    p.add_argument("--params", default=None, help="truth to check against the box")
    _add_box(p)
    p.add_argument("--cap", type=float, default=1.0, help="degree cap")
    p.add_argument("--mass-floor", type=float, default=0.01)
    p.add_argument("--spectrum-floor", type=float, default=0.1)
    p.add_argument("--full", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("experiment", help="run a consistency sweep")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HyperisingError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
