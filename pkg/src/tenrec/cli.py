"""Command-line interface.

Verbs: ``synth`` (make a ground-truth tensor), ``corrupt`` (apply a
missing+noise scenario), ``solve`` (recover), ``eval`` (score a recovery
against truth), ``run`` (full experiment grid from a YAML plan), ``lemma1``
(sandwich-bound sweep), and ``bench`` (per-iteration scaling benchmark).
Report-producing verbs write figures next to their CSV outputs unless
``--no-figures`` is passed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import plots
from .degrade import corrupt, parse_scenario
from .experiment import bench_scaling, build_config, export_slices, plan_from_yaml, run_experiment
from .metrics import MetricScope, lemma1_sweep, mae, rmse
from .solver import solve
from .synth import make_synthetic
from .tensorio import read_mask, read_tensor, write_mask, write_tensor


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(","))


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _ext(fmt: str) -> str:
    return ".tnr" if fmt == "binary" else ".csv"


def _load_truth(path):
    truth, mask = read_tensor(path)
    if not mask.all():
        raise SystemExit(f"error: ground truth {path} has missing entries")
    return truth


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", default="gtnln", help="gtnln | tnln | convex | tnln_tv[:theta]")
    parser.add_argument("--theta", type=float, default=None, help="TV weight for tnln_tv")
    parser.add_argument("--lambda", dest="lam", default="auto", help="sparsity weight (default: auto)")
    parser.add_argument("--weights", default=None, help="three mode weights, e.g. 0.4,0.3,0.3")
    parser.add_argument("--mu0", type=float, default=None)
    parser.add_argument("--mu-growth", type=float, default=None)
    parser.add_argument("--mu-cap", type=float, default=None)
    parser.add_argument("--max-iters", type=int, default=None)
    parser.add_argument("--rel-tol", type=float, default=None)


def _solver_overrides(args) -> dict:
    overrides = {}
    if args.lam != "auto":
        overrides["lam"] = float(args.lam)
    if args.weights is not None:
        overrides["weights"] = _parse_floats(args.weights)
    for attr, key in (
        ("theta", "theta"),
        ("mu0", "mu0"),
        ("mu_growth", "mu_growth"),
        ("mu_cap", "mu_cap"),
        ("max_iters", "max_iters"),
        ("rel_tol", "rel_tol"),
    ):
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    return overrides


def _cmd_synth(args) -> int:
    t = make_synthetic(
        dims=_parse_ints(args.dims),
        components=args.components,
        seed=args.seed,
        value_range=_parse_floats(args.value_range),
        day_period=args.day_period,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_tensor(out, t, args.format)
    print(f"wrote {out} shape={t.shape}")
    return 0


def _cmd_corrupt(args) -> int:
    truth = _load_truth(args.input)
    scenario = parse_scenario(args.scenario, seed=args.seed)
    y, mask, e0 = corrupt(truth, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = _ext(args.format)
    write_tensor(out / f"y{ext}", y, args.format, mask=mask if args.format == "csv" else None)
    write_mask(out / "mask.tnr", mask)
    write_tensor(out / f"e0{ext}", e0, args.format)
    with open(out / "scenario.json", "w") as fh:
        json.dump(
            {
                "scenario": scenario.label,
                "seed": args.seed,
                "observed_fraction": float(mask.mean()),
                "dims": list(y.shape),
            },
            fh,
            indent=2,
        )
    print(f"wrote {out}/y{ext}, mask.tnr, e0{ext} (observed {mask.mean():.3f})")
    return 0


def _cmd_solve(args) -> int:
    y, mask = read_tensor(args.input)
    if args.mask is not None:
        mask = read_mask(args.mask)
    cfg = build_config(args.variant, _solver_overrides(args))
    report = solve(y, mask, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = _ext(args.format)
    write_tensor(out / f"x_hat{ext}", report.x_hat, args.format)
    write_tensor(out / f"e_hat{ext}", report.e_hat, args.format)
    trace = report.trace_frame()
    trace.to_csv(out / "trace.csv", index=False)

    summary = {
        "variant": report.variant,
        "lambda": report.lam,
        "iterations": report.iterations_run,
        "converged": report.converged,
        "wall_ms": report.wall_ms,
        "final_rel_change": float(trace["rel_change"].iloc[-1]),
        "final_feasibility": float(trace["r_feasibility"].iloc[-1]),
    }
    truth = None
    if args.truth is not None:
        truth = _load_truth(args.truth)
        summary["mae_all"] = mae(truth, report.x_hat)
        summary["rmse_all"] = rmse(truth, report.x_hat)
        summary["mae_missing"] = mae(truth, report.x_hat, MetricScope.missing_only(mask)) if not mask.all() else None
        summary["rmse_missing"] = rmse(truth, report.x_hat, MetricScope.missing_only(mask)) if not mask.all() else None
    with open(out / "report.json", "w") as fh:
        json.dump(summary, fh, indent=2)

    if not args.no_figures:
        figures = out / "figures"
        figures.mkdir(exist_ok=True)
        plots.save_convergence(trace, figures / "convergence.png")
        day = min(args.figure_day, y.shape[2] - 1)
        truth_slice = truth[:, :, day] if truth is not None else None
        plots.save_slice_heatmaps(truth_slice, report.x_hat[:, :, day], day, figures / f"slice_day{day:03d}.png")
    print(f"solved in {report.iterations_run} iters (converged={report.converged}); outputs in {out}")
    return 0


def _cmd_eval(args) -> int:
    truth = _load_truth(args.truth)
    recovered, _ = read_tensor(args.recovered)
    mask = read_mask(args.mask) if args.mask is not None else None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rows = [{"scope": "all_entries", "mae": mae(truth, recovered), "rmse": rmse(truth, recovered)}]
    if mask is not None:
        if not mask.all():
            scope = MetricScope.missing_only(mask)
            rows.append({"scope": "missing_only", "mae": mae(truth, recovered, scope), "rmse": rmse(truth, recovered, scope)})
        if mask.any():
            scope = MetricScope.observed_only(mask)
            rows.append({"scope": "observed_only", "mae": mae(truth, recovered, scope), "rmse": rmse(truth, recovered, scope)})
    import pandas as pd

    pd.DataFrame(rows).to_csv(out / "metrics.csv", index=False)

    days = list(_parse_ints(args.days)) if args.days else [0]
    export_slices(truth, recovered, days, out / "slices")

    if not args.no_figures:
        figures = out / "figures"
        figures.mkdir(exist_ok=True)
        n1 = truth.shape[0]
        locations = sorted({0, n1 // 2, n1 - 1})
        for day in days:
            plots.save_slice_heatmaps(truth[:, :, day], recovered[:, :, day], day, figures / f"residual_day{day:03d}.png")
            plots.save_day_series(truth, recovered, day, locations, figures / f"series_day{day:03d}.png")
    for row in rows:
        print(f"{row['scope']}: mae={row['mae']:.4f} rmse={row['rmse']:.4f}")
    return 0


def _cmd_run(args) -> int:
    plan = plan_from_yaml(args.plan)
    if args.no_figures:
        plan.figures = False
    metrics, manifest = run_experiment(plan, args.out, base_dir=Path(args.plan).parent)
    print(metrics.to_string(index=False) if len(metrics) else "no successful runs")
    failures = manifest["failures"]
    if failures:
        print(f"{failures} run(s) failed; see {Path(args.out) / 'manifest.json'}", file=sys.stderr)
        return 1
    return 0


def _cmd_lemma1(args) -> int:
    table, rate = lemma1_sweep(dims=_parse_ints(args.dims), trials=args.trials, seed=args.seed, rank_tol=args.rank_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "sweep.csv", index=False)
    with open(out / "summary.json", "w") as fh:
        json.dump(
            {
                "trials": int(len(table)),
                "hold_rate": rate,
                "truncated_trials": int(table["truncated"].sum()),
                "dims": list(_parse_ints(args.dims)),
                "seed": args.seed,
            },
            fh,
            indent=2,
        )
    if not args.no_figures:
        plots.save_sandwich_scatter(table, out / "sweep.png")
    print(f"sandwich held on {rate:.1%} of {len(table)} trials")
    return 0 if rate == 1.0 else 1


def _cmd_bench(args) -> int:
    frame, slope = bench_scaling(
        sizes=_parse_ints(args.sizes), iters=args.iters, seed=args.seed, repeats=args.repeats
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "bench.csv", index=False)
    with open(out / "summary.json", "w") as fh:
        json.dump({"slope": slope, "sizes": frame["size"].tolist(), "per_iter_ms": frame["per_iter_ms"].tolist()}, fh, indent=2)
    if not args.no_figures:
        plots.save_scaling_fit(frame["size"], frame["per_iter_ms"], slope, out / "bench.png")
    print(frame.to_string(index=False))
    print(f"log-log slope: {slope:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tenrec", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth tensor")
    p.add_argument("--dims", required=True, help="n1,n2,n3")
    p.add_argument("--components", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--value-range", default="0,70")
    p.add_argument("--day-period", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("corrupt", help="apply a missing+noise scenario to a tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--scenario", required=True, help="e.g. rm:0.5+ln1, nm:0.3+gn2, rm:0.4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("solve", help="recover a tensor from observations")
    p.add_argument("--input", required=True, help="observed tensor (binary or long CSV with NaNs)")
    p.add_argument("--mask", default=None, help="binary mask file (overrides NaN-derived mask)")
    p.add_argument("--truth", default=None, help="optional complete tensor for metrics")
    _solver_flags(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--figure-day", type=int, default=0)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("eval", help="score a recovered tensor against ground truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--recovered", required=True)
    p.add_argument("--mask", default=None)
    p.add_argument("--days", default="0", help="comma-separated day indices for slice exports")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="run an experiment grid from a YAML plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("lemma1", help="sweep the TV sandwich bounds on random smooth tensors")
    p.add_argument("--dims", default="6,8,5")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_lemma1)

    p = sub.add_parser("bench", help="per-iteration scaling benchmark")
    p.add_argument("--sizes", default="20,30,40,50")
    p.add_argument("--iters", type=int, default=30)
    p.add_argument("--repeats", type=int, default=3, help="timed sweeps per size; the fastest counts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
