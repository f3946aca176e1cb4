"""Synthetic location x time x day tensors with smooth temporal structure."""

from __future__ import annotations

import numpy as np

__all__ = ["make_synthetic"]


def make_synthetic(
    dims: tuple[int, int, int],
    components: int = 4,
    seed: int = 0,
    value_range: tuple[float, float] = (0.0, 70.0),
    day_period: int | None = None,
) -> np.ndarray:
    """Sum of rank-1 components with smooth periodic time profiles.

    Each component is an outer product ``loc x time x day`` where the time
    profile is a shifted sinusoid with a small integer frequency (so it is
    smooth also across the cyclic wrap), the location profile is a positive
    random vector, and the day profile is either positive random or, when
    `day_period` is given, a sinusoid with that period (e.g. 7 for a weekly
    rhythm).  The sum is rescaled affinely into `value_range`.

    Parameters
    ----------
    dims : tuple of int
        Tensor shape ``(n1, n2, n3)``.
    components : int
        Number of rank-1 components (>= 1).
    seed : int
        Seed for the generator; outputs are a deterministic function of all
        arguments.
    value_range : tuple of float
        Min/max of the rescaled output, e.g. speeds in (0, 70).
    day_period : int or None
        Optional periodicity of the day mode.

    Returns
    -------
    numpy.ndarray
        Tensor of shape `dims` with values spanning `value_range`.
    """
    n1, n2, n3 = (int(d) for d in dims)
    if min(n1, n2, n3) < 1:
        raise ValueError(f"dims must be positive, got {dims}")
    if components < 1:
        raise ValueError(f"need at least one component, got {components}")
    lo, hi = (float(v) for v in value_range)
    if not hi > lo:
        raise ValueError(f"value_range must be increasing, got {value_range}")

    rng = np.random.default_rng(seed)
    hours = np.arange(n2)
    days = np.arange(n3)
    t = np.zeros((n1, n2, n3))
    for _ in range(components):
        loc = rng.gamma(shape=2.0, scale=1.0, size=n1) + 0.1
        freq = int(rng.integers(1, 4))
        phase = rng.uniform(0.0, 2.0 * np.pi)
        time = 1.1 + np.sin(2.0 * np.pi * freq * hours / n2 + phase)
        if day_period:
            day = 1.1 + np.sin(2.0 * np.pi * days / int(day_period) + rng.uniform(0.0, 2.0 * np.pi))
        else:
            day = rng.uniform(0.5, 1.5, size=n3)
        t += np.einsum("i,j,k->ijk", loc, time, day)

    span = t.max() - t.min()
    if span == 0.0:  # degenerate constant tensor (cannot happen with sinusoids, but be safe)
        return np.full((n1, n2, n3), 0.5 * (lo + hi))
    return lo + (t - t.min()) * ((hi - lo) / span)
