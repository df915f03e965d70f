"""Command-line entry points: fit, simulate, density-check.

JSON on stdout is the machine interface (schema ``fidux-report/1``);
aligned text tables and progress go to stderr.  Exit codes: 0 success,
1 a requested check failed, 2 input or configuration error, 3 numerical
failure.  Reports are byte-identical across runs for fixed inputs,
flags, and seed; wall-clock timing is therefore opt-in (``--timing``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import sample_baseline
from .data import ColumnSchema, build_risk_structure, load_dataset
from .errors import ConfigError, DataError, DegenerateDensityError, FiduxError, SolverError
from .gibbs import FiducialConfig, ks_distance, run_gibbs, summarize
from .partial_likelihood import newton_mle, wald_ci
from .rng import substream
from .simulate import StudyConfig, parse_scenarios, run_simulation_study


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "verbose", False):
        logging.basicConfig(stream=sys.stderr, level=logging.DEBUG,
                            format="%(name)s: %(message)s")
    try:
        return args.handler(args)
    except (DataError, ConfigError, DegenerateDensityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fidux")
    parser.add_argument("--version", action="version", version=f"fidux {__version__}")
    sub = parser.add_subparsers(required=True)

    fit = sub.add_parser("fit", help="fit a CSV dataset: MLE plus fiducial chain")
    _add_csv_args(fit)
    _add_chain_args(fit, default_seed=1)
    fit.add_argument("--baseline-draws", type=int, default=0,
                     help="also sample this many baseline-hazard draws")
    fit.add_argument("--table", action="store_true", help="print an aligned table to stderr")
    fit.add_argument("--draws-csv", type=Path, help="write retained draws as CSV")
    fit.add_argument("--out", type=Path, help="also write the JSON report here")
    _add_common_flags(fit)
    fit.set_defaults(handler=_cmd_fit)

    sim = sub.add_parser("simulate", help="run a Monte Carlo comparison study")
    sim.add_argument("scenarios", type=Path, help="JSON scenario file")
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--n-mcmc", type=int, default=400)
    sim.add_argument("--n-burn", type=int, default=40)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--box", type=float, default=30.0)
    sim.add_argument("--out-dir", type=Path, help="write report JSON and table here")
    _add_common_flags(sim)
    sim.set_defaults(handler=_cmd_simulate)

    dens = sub.add_parser("density-check",
                          help="compare chain draws against the 1-covariate density oracle")
    _add_csv_args(dens)
    dens.add_argument("--seed", type=int, default=0)
    dens.add_argument("--n-draws", type=int, default=2000)
    dens.add_argument("--n-burn", type=int, default=None,
                      help="default: n-draws // 10")
    dens.add_argument("--box", type=float, default=30.0)
    dens.add_argument("--grid-points", type=int, default=2001)
    dens.add_argument("--threshold", type=float, default=0.1)
    dens.add_argument("--out", type=Path, help="also write the JSON report here")
    _add_common_flags(dens)
    dens.set_defaults(handler=_cmd_density_check)
    return parser


def _add_csv_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("csv", type=Path, help="input CSV with a header row")
    p.add_argument("--time-col", default="time")
    p.add_argument("--status-col", default="status")
    p.add_argument("--covariates", default=None,
                   help="comma-separated covariate columns (default: all others)")
    p.add_argument("--delimiter", default=",")


def _add_chain_args(p: argparse.ArgumentParser, default_seed: int) -> None:
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--n-mcmc", type=int, default=400)
    p.add_argument("--n-burn", type=int, default=40)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--box", type=float, default=30.0)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock timing in the report (breaks byte-identity)")
    p.add_argument("--verbose", action="store_true", help="debug logging to stderr")


def _load_csv(args):
    covs = None
    if args.covariates:
        covs = tuple(s.strip() for s in args.covariates.split(",") if s.strip())
    schema = ColumnSchema(time=args.time_col, status=args.status_col,
                          covariates=covs, delimiter=args.delimiter)
    return load_dataset(args.csv, schema)


def _emit(report: dict, out: Path | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if out is not None:
        out.write_text(text + "\n", encoding="utf-8")


def _cmd_fit(args) -> int:
    started = time.perf_counter()
    data = _load_csv(args)
    risk = build_risk_structure(data)
    config = FiducialConfig(n_mcmc=args.n_mcmc, n_burn=args.n_burn, seed=args.seed,
                            alpha=args.alpha, box=args.box)
    mle = newton_mle(risk)
    samples = run_gibbs(risk, config, mle=mle)
    summary = summarize(samples, args.alpha)
    ci = wald_ci(mle, args.alpha)
    names = list(getattr(data, "covariate_names", [f"x{j + 1}" for j in range(data.p)]))

    coefficients = []
    for j in range(data.p):
        mle_block = {
            "estimate": float(mle.beta_hat[j]) if mle.converged else None,
            "ci_lower": float(ci[0][j]) if ci is not None else None,
            "ci_upper": float(ci[1][j]) if ci is not None else None,
        }
        coefficients.append({
            "name": names[j],
            "mle": mle_block,
            "fiducial": {
                "estimate": float(summary.point_estimate[j]),
                "ci_lower": float(summary.ci_lower[j]),
                "ci_upper": float(summary.ci_upper[j]),
            },
        })

    baseline_block = None
    if args.baseline_draws > 0:
        baseline_block = _baseline_summary(risk, data, samples, args)

    report = {
        "schema": "fidux-report/1",
        "kind": "fit",
        "config": {"seed": args.seed, "n_mcmc": args.n_mcmc, "n_burn": args.n_burn,
                   "alpha": args.alpha, "box": args.box},
        "data": {"n": data.n, "p": data.p, "m": data.m, "covariates": names},
        "mle": {"converged": mle.converged, "log_pl": mle.log_pl,
                "iterations": mle.iterations, "divergence_reason": mle.divergence_reason},
        "coefficients": coefficients,
        "chain": {"ess": samples.ess.tolist(), "box_active_count": samples.box_active_count},
        "baseline": baseline_block,
        "timing": {"seconds": time.perf_counter() - started} if args.timing else None,
    }
    if args.draws_csv:
        samples.save_csv(args.draws_csv)
    _emit(report, args.out)
    if args.table:
        print(_fit_table(report), file=sys.stderr)
    return 0


def _baseline_summary(risk, data, samples, args) -> dict:
    n_draws = min(args.baseline_draws, samples.draws.shape[0])
    knots = np.concatenate([[0.0], risk.failure_times])
    cum = np.empty((n_draws, knots.size))
    for i in range(n_draws):
        beta_star = samples.draws[-(i + 1)]
        bh = sample_baseline(risk, data, beta_star, substream(args.seed, 2, i))
        cum[i] = bh.cumulative(knots)
    lo, med, hi = np.quantile(cum, [args.alpha / 2.0, 0.5, 1.0 - args.alpha / 2.0], axis=0)
    return {
        "draws": n_draws,
        "knots": knots.tolist(),
        "cumulative_median": med.tolist(),
        "cumulative_lower": lo.tolist(),
        "cumulative_upper": hi.tolist(),
    }


def _fit_table(report: dict) -> str:
    rows = [f"{'coefficient':<14}{'mle':>12}{'mle 95% CI':>24}{'fiducial':>12}{'fiducial CI':>24}"]
    rows.append("-" * len(rows[0]))
    for coef in report["coefficients"]:
        mle = coef["mle"]
        fid = coef["fiducial"]
        if mle["estimate"] is None:
            mle_est, mle_ci = "diverged", ""
        else:
            mle_est = f"{mle['estimate']:.4f}"
            mle_ci = f"[{mle['ci_lower']:.3f}, {mle['ci_upper']:.3f}]"
        fid_ci = f"[{fid['ci_lower']:.3f}, {fid['ci_upper']:.3f}]"
        rows.append(f"{coef['name']:<14}{mle_est:>12}{mle_ci:>24}"
                    f"{fid['estimate']:>12.4f}{fid_ci:>24}")
    return "\n".join(rows)


def _cmd_simulate(args) -> int:
    started = time.perf_counter()
    try:
        raw = json.loads(args.scenarios.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {args.scenarios}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}") from None
    scenarios = parse_scenarios(raw)
    config = StudyConfig(reps=args.reps, n_mcmc=args.n_mcmc, n_burn=args.n_burn,
                         alpha=args.alpha, seed=args.seed, threads=args.threads,
                         box=args.box)

    def progress(name, done, total):
        if done % 10 == 0 or done == total:
            print(f"[{done}/{total}] {name}", file=sys.stderr)

    study = run_simulation_study(scenarios, config, progress=progress)
    report = study.to_dict()
    if args.timing:
        report["timing"] = {"seconds": time.perf_counter() - started}
    else:
        report["timing"] = None
    table = study.render_table()
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    print(table, file=sys.stderr)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "study_report.json").write_text(text + "\n", encoding="utf-8")
        (args.out_dir / "study_table.txt").write_text(table + "\n", encoding="utf-8")
    return 0


def _cmd_density_check(args) -> int:
    started = time.perf_counter()
    data = _load_csv(args)
    if data.p != 1:
        raise DataError(f"density check requires a single covariate, got p={data.p}")
    risk = build_risk_structure(data)
    n_burn = args.n_burn if args.n_burn is not None else args.n_draws // 10
    config = FiducialConfig(n_mcmc=args.n_draws, n_burn=n_burn, seed=args.seed,
                            box=args.box)
    samples = run_gibbs(risk, config)
    ks = ks_distance(samples.draws[:, 0], risk, box=args.box, n_points=args.grid_points)
    passed = bool(ks <= args.threshold)
    report = {
        "schema": "fidux-report/1",
        "kind": "density",
        "config": {"seed": args.seed, "n_draws": args.n_draws, "n_burn": n_burn,
                   "box": args.box, "grid_points": args.grid_points},
        "ks_distance": ks,
        "threshold": args.threshold,
        "passed": passed,
        "timing": {"seconds": time.perf_counter() - started} if args.timing else None,
    }
    _emit(report, args.out)
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
