"""Recovery-error metrics and the sandwich-bound sweep."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .gradient import build_gradient_operator
from .regularizers import ModeWeights, check_lemma1
from .synth import make_synthetic
from .tensor3 import as_mask, as_tensor3

__all__ = [
    "MetricScope",
    "mae",
    "rmse",
    "residual_slice",
    "lemma1_sweep",
]


@dataclass(frozen=True)
class MetricScope:
    """Which entries a metric averages over.

    ``which`` is one of ``all_entries`` (default; no mask needed),
    ``missing_only``, or ``observed_only``; the latter two require the
    observation mask.
    """

    which: str = "all_entries"
    mask: np.ndarray | None = None

    _KINDS = ("all_entries", "missing_only", "observed_only")

    def __post_init__(self):
        if self.which not in self._KINDS:
            raise ValueError(f"scope must be one of {self._KINDS}, got {self.which!r}")
        if self.which != "all_entries" and self.mask is None:
            raise ValueError(f"scope {self.which!r} needs an observation mask")

    @classmethod
    def all_entries(cls) -> "MetricScope":
        return cls()

    @classmethod
    def missing_only(cls, mask: np.ndarray) -> "MetricScope":
        return cls("missing_only", as_mask(mask))

    @classmethod
    def observed_only(cls, mask: np.ndarray) -> "MetricScope":
        return cls("observed_only", as_mask(mask))

    def select(self, diff: np.ndarray) -> np.ndarray:
        """Return the entries of `diff` this scope covers (flattened)."""
        if self.which == "all_entries":
            return diff.ravel()
        mask = as_mask(self.mask, diff.shape)
        selected = diff[~mask] if self.which == "missing_only" else diff[mask]
        if selected.size == 0:
            raise ValueError(f"scope {self.which!r} selects no entries")
        return selected


def _diff(x0, xhat) -> np.ndarray:
    x0 = as_tensor3(x0, "ground truth")
    xhat = as_tensor3(xhat, "recovered tensor")
    if x0.shape != xhat.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {xhat.shape}")
    return x0 - xhat


def mae(x0: np.ndarray, xhat: np.ndarray, scope: MetricScope | None = None) -> float:
    """Mean absolute error over the scope (all entries by default)."""
    scope = scope or MetricScope.all_entries()
    return float(np.mean(np.abs(scope.select(_diff(x0, xhat)))))


def rmse(x0: np.ndarray, xhat: np.ndarray, scope: MetricScope | None = None) -> float:
    """Root mean square error over the scope (all entries by default)."""
    scope = scope or MetricScope.all_entries()
    return float(np.sqrt(np.mean(scope.select(_diff(x0, xhat)) ** 2)))


def residual_slice(x0: np.ndarray, xhat: np.ndarray, day: int) -> np.ndarray:
    """Location x time residual matrix ``x0[:, :, day] - xhat[:, :, day]``."""
    diff = _diff(x0, xhat)
    day = int(day)
    if not 0 <= day < diff.shape[2]:
        raise ValueError(f"day {day} out of range for {diff.shape[2]} days")
    return diff[:, :, day]


def lemma1_sweep(
    dims: tuple[int, int, int],
    trials: int,
    seed: int = 0,
    weights: ModeWeights | None = None,
    rank_tol: float = 1e-8,
) -> tuple[pd.DataFrame, float]:
    """Evaluate the TV sandwich on `trials` random smooth tensors.

    Each trial draws a fresh smooth low-rank tensor (1-3 rank-1 components)
    of shape `dims` and records the bounds from
    :func:`tenrec.regularizers.check_lemma1`.  Trials whose unfoldings hit
    the numerical rank tolerance are flagged in the ``truncated`` column, not
    failed.

    Returns
    -------
    (table, rate) : tuple
        `table` has one row per trial with columns ``trial, components,
        lower, value, upper, holds, max_rank, eta, truncated``; `rate` is the
        fraction of trials where the sandwich held.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    op = build_gradient_operator(dims[1])
    root = np.random.SeedSequence(seed)
    rows = []
    for trial, child in enumerate(root.spawn(int(trials))):
        child_rng = np.random.default_rng(child)
        components = int(child_rng.integers(1, 4))
        tensor_seed = int(child_rng.integers(0, 2**32))
        t = make_synthetic(dims, components=components, seed=tensor_seed, value_range=(0.0, 10.0))
        result = check_lemma1(t, op, weights, rank_tol=rank_tol)
        rows.append(
            {
                "trial": trial,
                "components": components,
                "lower": result.lower,
                "value": result.value,
                "upper": result.upper,
                "holds": result.holds,
                "max_rank": result.max_rank,
                "eta": result.eta,
                "truncated": result.truncated,
            }
        )
    table = pd.DataFrame(rows)
    return table, float(table["holds"].mean())
