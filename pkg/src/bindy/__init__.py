"""Bayesian identification of nonlinear dynamics by reversible-jump MCMC over dictionary models."""

from .bayes import NoisePrior, ParamPrior, log_model_evidence
from .errors import (
    BindyError,
    ConfigError,
    DegenerateColumnError,
    DegeneratePosteriorError,
    IngestionError,
    InputError,
    NumericalError,
)
from .library import TermLibrary, build_legendre_library, build_polynomial_library, normalize_columns
from .models import FlatPrior, GeometricPrior, ModelIndex, PerTermPrior
from .sampler import Chain, SamplerConfig, run_chain, run_chains_parallel

__version__ = "0.1.0"

__all__ = [
    "BindyError", "Chain", "ConfigError", "DegenerateColumnError", "DegeneratePosteriorError",
    "FlatPrior", "GeometricPrior", "IngestionError", "InputError", "ModelIndex", "NoisePrior",
    "NumericalError", "ParamPrior", "PerTermPrior", "SamplerConfig", "TermLibrary",
    "build_legendre_library", "build_polynomial_library", "log_model_evidence",
    "normalize_columns", "run_chain", "run_chains_parallel",
]
