"""Reference simulators: g-and-k, stochastic Gompertz, 2-D correlated GBM, and a toy model."""

from .base import Model
from .gandk import GandKModel, GandKParams, gandk_quantile, gandk_simulate, gandk_summaries
from .gbm import (
    Gbm2dModel,
    Gbm2dParams,
    OptimizationError,
    gbm1d_transition_loglik,
    gbm2d_closed_form_mle,
    gbm2d_exact_loglik,
    gbm2d_exact_mle,
    gbm2d_simulate,
    gbm2d_summaries,
)
from .gompertz import GompertzModel, GompertzParams, gompertz_simulate
from .priors import LogNormal, Normal, Prior, TruncatedNormal, Uniform
from .toy import DiscreteToyModel, enumerated_abc_posterior

__all__ = [
    "Model", "GandKModel", "GandKParams", "gandk_quantile", "gandk_simulate",
    "gandk_summaries", "Gbm2dModel", "Gbm2dParams", "OptimizationError",
    "gbm1d_transition_loglik", "gbm2d_closed_form_mle", "gbm2d_exact_loglik",
    "gbm2d_exact_mle", "gbm2d_simulate", "gbm2d_summaries", "GompertzModel",
    "GompertzParams", "gompertz_simulate", "LogNormal", "Normal", "Prior",
    "TruncatedNormal", "Uniform", "DiscreteToyModel", "enumerated_abc_posterior",
]
