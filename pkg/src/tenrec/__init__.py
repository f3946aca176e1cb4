"""Robust completion of third-order traffic tensors.

Recovers a location x time x day tensor from partial, outlier-contaminated
observations by penalizing the nuclear l1-l2 norm of the tensor's temporal
gradient, solved with an ADMM loop.  Ships the main solver plus reference
variants (the same penalty on the raw tensor, a convex nuclear-norm baseline,
and a total-variation hybrid), degradation simulators, metrics, plotting, and
a CLI.
"""

from .degrade import (
    DegradationScenario,
    MissingSpec,
    NoiseSpec,
    NOISE_PRESETS,
    corrupt,
    make_mask,
    parse_scenario,
)
from .gradient import GradientOperator, solve_scaled_laplacian
from .metrics import MetricScope, lemma1_sweep, mae, residual_slice, rmse
from .regularizers import (
    ModeWeights,
    check_lemma1,
    convex_tnn,
    gtnln,
    prox_l1_minus_l2,
    prox_nuclear,
    prox_nuclear_l1l2,
    soft_threshold,
    tnln,
    tv,
)
from .solver import RecoveryReport, SolverConfig, VARIANTS, auto_lambda, solve, solve_variant
from .synth import make_synthetic
from .tensor3 import fold, mode2_product, project, unfold

__version__ = "0.1.0"

__all__ = [
    "DegradationScenario",
    "GradientOperator",
    "MetricScope",
    "MissingSpec",
    "ModeWeights",
    "NOISE_PRESETS",
    "NoiseSpec",
    "RecoveryReport",
    "SolverConfig",
    "VARIANTS",
    "auto_lambda",
    "check_lemma1",
    "convex_tnn",
    "corrupt",
    "fold",
    "gtnln",
    "lemma1_sweep",
    "mae",
    "make_mask",
    "make_synthetic",
    "mode2_product",
    "parse_scenario",
    "project",
    "prox_l1_minus_l2",
    "prox_nuclear",
    "prox_nuclear_l1l2",
    "residual_slice",
    "rmse",
    "soft_threshold",
    "solve",
    "solve_scaled_laplacian",
    "solve_variant",
    "tnln",
    "tv",
    "unfold",
    "__version__",
]
