"""Report figures rendered next to the delimited outputs.

All functions take data already computed elsewhere, draw one figure, save it
to `path`, and close it.  The Agg backend is forced so the CLI works
headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

__all__ = [
    "save_convergence",
    "save_slice_heatmaps",
    "save_day_series",
    "save_sandwich_scatter",
    "save_scaling_fit",
]

_FIGSIZE = (6.4, 4.0)


def _finish(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_convergence(trace: pd.DataFrame, path) -> None:
    """Relative change and feasibility per iteration, log scale."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.semilogy(trace["iteration"], trace["rel_change"].clip(lower=1e-16), label="relative change")
    if "r_feasibility" in trace:
        ax.semilogy(trace["iteration"], trace["r_feasibility"].clip(lower=1e-16), label="observed feasibility")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)


def save_slice_heatmaps(truth: np.ndarray | None, recovered: np.ndarray, day: int, path) -> None:
    """Location x time heatmaps for one day: truth, recovered, residual."""
    panels = [("recovered", recovered)]
    if truth is not None:
        panels = [("truth", truth), ("recovered", recovered), ("residual", truth - recovered)]
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.6), squeeze=False)
    for ax, (title, data) in zip(axes[0], panels):
        im = ax.imshow(data, aspect="auto", origin="lower", cmap="RdBu_r" if title == "residual" else "viridis")
        ax.set_title(f"{title} (day {day})")
        ax.set_xlabel("time")
        ax.set_ylabel("location")
        fig.colorbar(im, ax=ax, fraction=0.046)
    _finish(fig, path)


def save_day_series(truth: np.ndarray, recovered: np.ndarray, day: int, locations, path) -> None:
    """Overlay truth vs recovered time series for a few locations on one day."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for loc in locations:
        ax.plot(truth[loc, :, day], lw=1.2, label=f"truth loc {loc}")
        ax.plot(recovered[loc, :, day], lw=1.2, ls="--", label=f"recovered loc {loc}")
    ax.set_xlabel("time of day")
    ax.set_ylabel("value")
    ax.set_title(f"day {day}")
    ax.legend(fontsize=8)
    _finish(fig, path)


def save_sandwich_scatter(table: pd.DataFrame, path) -> None:
    """Sandwich-bound sweep: value vs lower/upper bound per trial."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    order = np.argsort(table["value"].to_numpy())
    ax.plot(table["lower"].to_numpy()[order], lw=1, label="lower bound")
    ax.plot(table["value"].to_numpy()[order], lw=1, label="value")
    ax.plot(table["upper"].to_numpy()[order], lw=1, label="upper bound")
    ax.set_xlabel("trial (sorted by value)")
    ax.set_ylabel("penalty value")
    ax.set_yscale("log")
    ax.legend()
    _finish(fig, path)


def save_scaling_fit(sizes, per_iter_ms, slope: float, path) -> None:
    """Log-log per-iteration time vs cube size with the fitted power law."""
    sizes = np.asarray(sizes, dtype=float)
    times = np.asarray(per_iter_ms, dtype=float)
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.loglog(sizes, times, "o", label="measured")
    anchor = times[0] / sizes[0] ** slope
    ax.loglog(sizes, anchor * sizes**slope, "--", label=f"fit slope {slope:.2f}")
    ax.set_xlabel("cube size n")
    ax.set_ylabel("per-iteration time (ms)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    _finish(fig, path)
