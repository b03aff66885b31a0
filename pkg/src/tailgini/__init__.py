"""Tail Gini functional estimation for asymptotically independent loss pairs."""

from tailgini.errors import (
    ConfigError,
    ConvergenceError,
    DataFormatError,
    DegenerateSampleError,
    EstimatorError,
    ExperimentError,
    InvalidSampleError,
    TailGiniError,
)
from tailgini.estimators import (
    TailConfig,
    TailGiniFit,
    eta_hat,
    extrapolation_exponent,
    fit_tail_gini,
    hill_gamma1,
    phi0_constant,
    tg_extreme,
    tg_hw_baseline,
    tg_intermediate,
)
from tailgini.sample_core import PairedSample, tg_bruteforce
from tailgini.tailtest import tqcc_pvalue

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DataFormatError",
    "DegenerateSampleError",
    "EstimatorError",
    "ExperimentError",
    "InvalidSampleError",
    "PairedSample",
    "TailConfig",
    "TailGiniError",
    "TailGiniFit",
    "eta_hat",
    "extrapolation_exponent",
    "fit_tail_gini",
    "hill_gamma1",
    "phi0_constant",
    "tg_bruteforce",
    "tg_extreme",
    "tg_hw_baseline",
    "tg_intermediate",
    "tqcc_pvalue",
]
