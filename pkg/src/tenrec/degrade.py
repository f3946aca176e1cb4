"""Missing-data and sparse-noise simulators, plus the scenario mini-grammar.

Two missing patterns are supported: random missing (RM), where every entry is
observed independently with probability ``1 - rate``, and non-random missing
(NM), where ``floor(rate * n1 * n3)`` whole time fibers — (location, day)
pairs — are removed.  Noise is Laplace (LN), Gaussian (GN), or their sum
(CN), always zero mean, and is added only at observed entries.

Scenario strings follow ``rm:<rate>+<preset>`` / ``nm:<rate>+<preset>`` with
presets ``ln1, ln2, gn1, gn2, cn1, cn2, none``; the noise part may be omitted
(``rm:0.5``).  Presets fix the scale parameters: ln1/ln2 are Laplace with
b=3/5, gn1/gn2 are Gaussian with sigma=3/5, cn1/cn2 combine b=sigma=2/3.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .tensor3 import as_tensor3, project

__all__ = [
    "NoiseSpec",
    "MissingSpec",
    "DegradationScenario",
    "NOISE_PRESETS",
    "sample_laplace",
    "sample_gaussian",
    "sample_composite",
    "draw_noise",
    "make_mask_rm",
    "make_mask_nm",
    "make_mask",
    "corrupt",
    "parse_scenario",
]

_NOISE_KINDS = ("laplace", "gaussian", "composite")
_MISSING_KINDS = ("rm", "nm")


@dataclass(frozen=True)
class NoiseSpec:
    """Zero-mean sparse-noise model: kind plus scale parameters and a seed."""

    kind: str
    b: float = 0.0
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {_NOISE_KINDS}, got {self.kind!r}")
        if self.kind in ("laplace", "composite") and not self.b > 0:
            raise ValueError(f"{self.kind} noise needs b > 0, got {self.b}")
        if self.kind in ("gaussian", "composite") and not self.sigma > 0:
            raise ValueError(f"{self.kind} noise needs sigma > 0, got {self.sigma}")


@dataclass(frozen=True)
class MissingSpec:
    """Missing pattern: kind ('rm' or 'nm'), missing rate in [0, 1), seed."""

    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in _MISSING_KINDS:
            raise ValueError(f"missing kind must be one of {_MISSING_KINDS}, got {self.kind!r}")
        if not (0.0 <= self.rate < 1.0):
            raise ValueError(f"missing rate must lie in [0, 1), got {self.rate}")


@dataclass(frozen=True)
class DegradationScenario:
    """A missing pattern plus an optional noise model, with a printable label."""

    missing: MissingSpec
    noise: NoiseSpec | None = None
    label: str = ""


# Preset scale parameters keyed by the scenario-grammar token.
NOISE_PRESETS: dict[str, dict | None] = {
    "ln1": {"kind": "laplace", "b": 3.0},
    "ln2": {"kind": "laplace", "b": 5.0},
    "gn1": {"kind": "gaussian", "sigma": 3.0},
    "gn2": {"kind": "gaussian", "sigma": 5.0},
    "cn1": {"kind": "composite", "b": 2.0, "sigma": 2.0},
    "cn2": {"kind": "composite", "b": 3.0, "sigma": 3.0},
    "none": None,
}


def sample_laplace(b: float, count: int, seed) -> np.ndarray:
    """`count` i.i.d. zero-mean Laplace(b) draws (inverse-CDF of a uniform)."""
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    return np.random.default_rng(seed).laplace(0.0, b, size=int(count))


def sample_gaussian(sigma: float, count: int, seed) -> np.ndarray:
    """`count` i.i.d. zero-mean Gaussian(sigma) draws."""
    if not sigma > 0:
        raise ValueError(f"Gaussian scale must be positive, got {sigma}")
    return np.random.default_rng(seed).normal(0.0, sigma, size=int(count))


def sample_composite(b: float, sigma: float, count: int, seed) -> np.ndarray:
    """Sum of independent Gaussian(sigma) and Laplace(b) draws.

    The two parts use deterministic child seeds spawned from `seed`, so the
    composite stream is reproducible and the parts are independent.
    """
    gauss_seed, laplace_seed = np.random.SeedSequence(seed).spawn(2)
    return sample_gaussian(sigma, count, gauss_seed) + sample_laplace(b, count, laplace_seed)


def draw_noise(spec: NoiseSpec, count: int) -> np.ndarray:
    """Draw `count` values according to `spec` (dispatch on kind)."""
    if spec.kind == "laplace":
        return sample_laplace(spec.b, count, spec.seed)
    if spec.kind == "gaussian":
        return sample_gaussian(spec.sigma, count, spec.seed)
    return sample_composite(spec.b, spec.sigma, count, spec.seed)


def make_mask_rm(dims: tuple[int, int, int], rate: float, seed) -> np.ndarray:
    """Bernoulli mask: each entry observed independently with prob ``1 - rate``."""
    _check_rate(rate)
    dims = _check_dims(dims)
    return np.random.default_rng(seed).random(dims) >= rate


def make_mask_nm(dims: tuple[int, int, int], rate: float, seed) -> np.ndarray:
    """Fiber mask: exactly ``floor(rate * n1 * n3)`` whole time fibers missing.

    The missing (location, day) pairs are drawn uniformly without
    replacement; all other fibers are fully observed.
    """
    _check_rate(rate)
    n1, n2, n3 = _check_dims(dims)
    count = int(np.floor(rate * n1 * n3))
    mask = np.ones((n1, n2, n3), dtype=bool)
    if count:
        chosen = np.random.default_rng(seed).choice(n1 * n3, size=count, replace=False)
        loc, day = np.unravel_index(chosen, (n1, n3))
        mask[loc, :, day] = False
    return mask


def make_mask(spec: MissingSpec, dims: tuple[int, int, int]) -> np.ndarray:
    """Build the observation mask described by `spec`."""
    if spec.kind == "rm":
        return make_mask_rm(dims, spec.rate, spec.seed)
    return make_mask_nm(dims, spec.rate, spec.seed)


def corrupt(x0: np.ndarray, scenario: DegradationScenario):
    """Apply a degradation scenario to a ground-truth tensor.

    Returns
    -------
    (y, mask, e0) : tuple
        `mask` is the observation mask, `e0` the noise tensor (zero at
        unobserved entries), and ``y = project(x0 + e0, mask)`` the observed
        data, zero at unobserved entries.  Deterministic in
        ``(x0, scenario)``.
    """
    x0 = as_tensor3(x0, "ground truth")
    mask = make_mask(scenario.missing, x0.shape)
    e0 = np.zeros_like(x0)
    if scenario.noise is not None:
        observed = int(mask.sum())
        if observed:
            e0[mask] = draw_noise(scenario.noise, observed)
    y = project(x0 + e0, mask)
    return y, mask, e0


_SCENARIO_RE = re.compile(r"(rm|nm):([0-9.eE+-]+?)(?:\+([a-z0-9]+))?")


def parse_scenario(text: str, seed: int = 0) -> DegradationScenario:
    """Parse a scenario string like ``rm:0.5+ln1`` into a scenario object.

    The mask and noise streams get independent child seeds derived from
    `seed`, so one integer reproduces the whole degradation.
    """
    cleaned = text.strip().lower()
    match = _SCENARIO_RE.fullmatch(cleaned)
    if match is None:
        raise ValueError(
            f"bad scenario {text!r}: expected rm:<rate>+<preset> / nm:<rate>+<preset> / rm:<rate>"
        )
    kind, rate_text, preset = match.group(1), match.group(2), match.group(3) or "none"
    try:
        rate = float(rate_text)
    except ValueError:
        raise ValueError(f"bad scenario {text!r}: {rate_text!r} is not a number") from None
    if preset not in NOISE_PRESETS:
        raise ValueError(f"bad scenario {text!r}: unknown noise preset {preset!r} (have {sorted(NOISE_PRESETS)})")
    mask_child, noise_child = np.random.SeedSequence(seed).spawn(2)
    mask_seed = int(mask_child.generate_state(1)[0])
    missing = MissingSpec(kind=kind, rate=rate, seed=mask_seed)
    params = NOISE_PRESETS[preset]
    noise = None
    if params is not None:
        noise = NoiseSpec(seed=int(noise_child.generate_state(1)[0]), **params)
    return DegradationScenario(missing=missing, noise=noise, label=cleaned)


def _check_rate(rate: float) -> None:
    if not (0.0 <= rate < 1.0):
        raise ValueError(f"missing rate must lie in [0, 1), got {rate}")


def _check_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    return dims
