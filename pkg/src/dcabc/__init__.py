"""Approximate Bayesian computation with data cloning for maximum likelihood estimation."""

from .core import (
    ChainTrace,
    CloneSchedule,
    ConfigError,
    Dataset,
    DcabcError,
    DegenerateStatisticError,
    DeltaSchedule,
    DomainError,
    NumericalError,
    ParameterVector,
    RandomSource,
    active_clones,
    active_delta,
)
from .inference import (
    AdjustmentResult,
    BootstrapError,
    BootstrapReport,
    asymptotic_se,
    eigenvalue_decay,
    parametric_bootstrap,
    regression_adjust,
)
from .kernels import (
    KernelKind,
    KernelSpec,
    RegressionError,
    SummaryProjection,
    WeightMatrix,
    cloned_log_kernel,
    log_kernel,
    pilot_weights,
)
from .proposals import AdaptiveRWState, IndependenceSamplerSpec
from .samplers import (
    AbcDcConfig,
    DcResult,
    ModeTracker,
    StagnationError,
    abc_mcmc,
    dc_mcmc,
    dynamic_abc_dc,
    static_abc_dc,
)

__version__ = "0.1.0"

__all__ = [
    "ChainTrace", "CloneSchedule", "ConfigError", "Dataset", "DcabcError",
    "DegenerateStatisticError", "DeltaSchedule", "DomainError", "NumericalError",
    "ParameterVector", "RandomSource", "active_clones", "active_delta",
    "AdjustmentResult", "BootstrapError", "BootstrapReport", "asymptotic_se",
    "eigenvalue_decay", "parametric_bootstrap", "regression_adjust", "KernelKind",
    "KernelSpec", "RegressionError", "SummaryProjection", "WeightMatrix",
    "cloned_log_kernel", "log_kernel", "pilot_weights", "AdaptiveRWState",
    "IndependenceSamplerSpec", "AbcDcConfig", "DcResult", "ModeTracker",
    "StagnationError", "abc_mcmc", "dc_mcmc", "dynamic_abc_dc", "static_abc_dc",
]
