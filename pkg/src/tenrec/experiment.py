"""Experiment orchestration: plans, the run grid, slices, and the benchmark.

A plan is a small YAML file::

    datasets:
      - name: demo
        synth: {dims: [30, 48, 10], components: 4, seed: 7}
      # or: - name: guangzhou
      #        path: guangzhou.tnr
    scenarios: [ "rm:0.5+ln1", "nm:0.3+gn1" ]
    variants:  [ "gtnln", "tnln", "convex" ]
    seeds:     [ 0, 1, 2 ]
    solver:    { max_iters: 300, rel_tol: 1.0e-5 }
    figures:   true

Every (dataset, scenario, variant, seed) cell is corrupted, solved, and
evaluated; rows that raise are recorded as failures and the rest keep going.
Outputs under the chosen directory: ``metrics.csv`` (one row per successful
run), ``traces/<run>.csv`` (per-iteration solver trace), ``figures/*.png``
(convergence curves), and ``manifest.json`` echoing every config value and
seed needed for an exact rerun.
"""

from __future__ import annotations

import json
import math
import re
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from . import plots
from .degrade import corrupt, parse_scenario
from .metrics import mae, rmse
from .solver import SolverConfig, solve, variant_from_token
from .synth import make_synthetic
from .tensor3 import as_tensor3
from .tensorio import read_tensor

__all__ = [
    "DatasetDescriptor",
    "ExperimentPlan",
    "plan_from_yaml",
    "run_experiment",
    "export_slices",
    "bench_scaling",
]

METRICS_COLUMNS = ("dataset", "scenario", "variant", "seed", "mae", "rmse", "iters", "wall_ms")


@dataclass(frozen=True)
class DatasetDescriptor:
    """A named ground-truth tensor: a file path or synthetic parameters."""

    name: str
    path: str | None = None
    fmt: str | None = None
    dims: tuple | None = None
    synth: dict | None = None

    def load(self, base_dir: Path | None = None) -> np.ndarray:
        if (self.path is None) == (self.synth is None):
            raise ValueError(f"dataset {self.name!r} needs exactly one of 'path' or 'synth'")
        if self.synth is not None:
            params = dict(self.synth)
            params["dims"] = tuple(params.get("dims", (30, 48, 10)))
            if "value_range" in params:
                params["value_range"] = tuple(params["value_range"])
            return make_synthetic(**params)
        path = Path(self.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        t, mask = read_tensor(path, self.fmt, self.dims)
        if not mask.all():
            raise ValueError(f"dataset {self.name!r} has missing entries; ground truth must be complete")
        return as_tensor3(t, f"dataset {self.name!r}")


@dataclass
class ExperimentPlan:
    datasets: list[DatasetDescriptor]
    scenarios: list[str]
    variants: list[str] = field(default_factory=lambda: ["gtnln"])
    seeds: list[int] = field(default_factory=lambda: [0])
    solver: dict = field(default_factory=dict)
    figures: bool = True

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("plan has no datasets")
        if not self.scenarios:
            raise ValueError("plan has no scenarios")
        if not self.variants:
            raise ValueError("plan has no variants")
        if not self.seeds:
            raise ValueError("plan has no seeds")


def plan_from_yaml(path) -> ExperimentPlan:
    """Load an :class:`ExperimentPlan` from a YAML file."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: plan must be a mapping")
    datasets = [DatasetDescriptor(**d) for d in raw.get("datasets", [])]
    return ExperimentPlan(
        datasets=datasets,
        scenarios=list(raw.get("scenarios", [])),
        variants=list(raw.get("variants", ["gtnln"])),
        seeds=[int(s) for s in raw.get("seeds", [0])],
        solver=dict(raw.get("solver", {})),
        figures=bool(raw.get("figures", True)),
    )


def build_config(variant_token: str, overrides: dict | None = None) -> SolverConfig:
    """Turn a variant token plus plan-level overrides into a SolverConfig."""
    variant, theta = variant_from_token(variant_token)
    kwargs = dict(overrides or {})
    if "weights" in kwargs:
        kwargs["weights"] = tuple(kwargs["weights"])
    if theta is not None:
        kwargs["theta"] = theta
    return SolverConfig(variant=variant, **kwargs)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text.strip())


def run_experiment(plan: ExperimentPlan, out_dir, base_dir: Path | None = None):
    """Run the full grid; returns ``(metrics_frame, manifest_dict)``.

    Failures are recorded per run in the manifest (``status: failed``) and do
    not stop the grid; ``manifest["failures"]`` counts them.
    """
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    if plan.figures:
        (out / "figures").mkdir(exist_ok=True)

    runs = []
    rows = []
    for ds in plan.datasets:
        try:
            x0 = ds.load(base_dir)
        except Exception as exc:  # noqa: BLE001 - fail-soft per dataset
            for scenario in plan.scenarios:
                for token in plan.variants:
                    for seed in plan.seeds:
                        runs.append(_failed_run(ds.name, scenario, token, seed, f"dataset load failed: {exc}"))
            continue
        for scenario_text in plan.scenarios:
            for token in plan.variants:
                for seed in plan.seeds:
                    run_id = f"{_slug(ds.name)}__{_slug(scenario_text)}__{_slug(token)}__s{seed}"
                    try:
                        scenario = parse_scenario(scenario_text, seed=seed)
                        cfg = build_config(token, plan.solver)
                        y, mask, _ = corrupt(x0, scenario)
                        report = solve(y, mask, cfg)
                        row = {
                            "dataset": ds.name,
                            "scenario": scenario_text,
                            "variant": token,
                            "seed": seed,
                            "mae": mae(x0, report.x_hat),
                            "rmse": rmse(x0, report.x_hat),
                            "iters": report.iterations_run,
                            "wall_ms": report.wall_ms,
                        }
                        rows.append(row)
                        trace_path = out / "traces" / f"{run_id}.csv"
                        report.trace_frame().to_csv(trace_path, index=False)
                        figure_path = None
                        if plan.figures:
                            figure_path = out / "figures" / f"{run_id}_convergence.png"
                            plots.save_convergence(report.trace_frame(), figure_path)
                        runs.append(
                            {
                                "id": run_id,
                                "dataset": ds.name,
                                "scenario": scenario_text,
                                "variant": token,
                                "seed": seed,
                                "status": "ok",
                                "converged": report.converged,
                                "metrics": {k: row[k] for k in ("mae", "rmse", "iters", "wall_ms")},
                                "trace_csv": str(trace_path),
                                "figure": str(figure_path) if figure_path else None,
                            }
                        )
                    except Exception as exc:  # noqa: BLE001 - fail-soft per run
                        runs.append(_failed_run(ds.name, scenario_text, token, seed, str(exc), run_id))

    metrics = pd.DataFrame(rows, columns=list(METRICS_COLUMNS))
    metrics.to_csv(out / "metrics.csv", index=False)

    failures = sum(1 for r in runs if r["status"] == "failed")
    manifest = {
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "numpy_version": np.__version__,
        "plan": {
            "datasets": [asdict(d) for d in plan.datasets],
            "scenarios": plan.scenarios,
            "variants": plan.variants,
            "seeds": plan.seeds,
            "solver": plan.solver,
            "figures": plan.figures,
        },
        "solver_defaults": _config_dict(SolverConfig()),
        "runs": runs,
        "failures": failures,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return metrics, manifest


def _config_dict(cfg: SolverConfig) -> dict:
    d = asdict(cfg)
    d["weights"] = list(cfg.weights.alpha)
    return d


def _failed_run(dataset, scenario, variant, seed, error, run_id=None):
    return {
        "id": run_id or f"{_slug(dataset)}__{_slug(scenario)}__{_slug(variant)}__s{seed}",
        "dataset": dataset,
        "scenario": scenario,
        "variant": variant,
        "seed": seed,
        "status": "failed",
        "error": error,
    }


def export_slices(x0: np.ndarray, xhat: np.ndarray, days, out_dir) -> list[Path]:
    """Write one CSV per day: ``location,time,truth,recovered,residual``."""
    x0 = as_tensor3(x0, "ground truth")
    xhat = as_tensor3(xhat, "recovered tensor")
    if x0.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {xhat.shape}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n1, n2, n3 = x0.shape
    loc, tim = (a.ravel(order="F") for a in np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij"))
    paths = []
    for day in days:
        day = int(day)
        if not 0 <= day < n3:
            raise ValueError(f"day {day} out of range for {n3} days")
        truth = x0[:, :, day].ravel(order="F")
        recovered = xhat[:, :, day].ravel(order="F")
        frame = pd.DataFrame(
            {
                "location": loc,
                "time": tim,
                "truth": truth,
                "recovered": recovered,
                "residual": truth - recovered,
            }
        )
        path = out / f"slice_day{day:03d}.csv"
        frame.to_csv(path, index=False)
        paths.append(path)
    return paths


def bench_scaling(
    sizes=(20, 30, 40, 50), iters: int = 30, seed: int = 0, repeats: int = 3, solver: dict | None = None
):
    """Per-iteration wall time of the solver loop on (n, n, n) cubes.

    Each cube gets a synthetic ground truth, 50% random missing plus Laplace
    noise, and fixed-iteration solves (``rel_tol=0``) with the trace recording
    off, so the loop runs bare updates.  One untimed sweep over all sizes
    warms the process up, then `repeats` timed sweeps run interleaved --
    every sweep touches every size, so a slow stretch of machine time hits
    all sizes alike instead of whichever one happened to be up.  The fastest
    sweep counts per size (system jitter only ever inflates a timing).
    Returns ``(frame, slope)`` where `frame` has columns ``size, iters,
    per_iter_ms`` and `slope` is the log-log fit of time against size.
    """
    sizes = [int(n) for n in sizes]
    if len(sizes) < 2:
        raise ValueError("need at least two sizes to fit a slope")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    overrides = dict(solver or {})
    overrides.update({"max_iters": int(iters), "rel_tol": 0.0, "record_trace": False})
    cfg = SolverConfig(**overrides)
    instances = []
    for n in sizes:
        x0 = make_synthetic((n, n, n), components=4, seed=seed, value_range=(0.0, 70.0))
        y, mask, _ = corrupt(x0, parse_scenario("rm:0.5+ln1", seed=seed))
        instances.append((n, y, mask))
    for _, y, mask in instances:
        solve(y, mask, cfg)  # warmup sweep
    best = {n: math.inf for n, _, _ in instances}
    iters_run = {n: 0 for n, _, _ in instances}
    for _ in range(repeats):
        for n, y, mask in instances:
            report = solve(y, mask, cfg)
            best[n] = min(best[n], report.loop_ms)
            iters_run[n] = report.iterations_run
    rows = [
        {"size": n, "iters": iters_run[n], "per_iter_ms": best[n] / iters_run[n]}
        for n, _, _ in instances
    ]
    frame = pd.DataFrame(rows)
    slope = float(np.polyfit(np.log(frame["size"]), np.log(frame["per_iter_ms"]), 1)[0])
    return frame, slope
