"""Exception hierarchy shared across the package."""


class BindyError(Exception):
    """Base class for all package errors."""


class InputError(BindyError, ValueError):
    """Malformed or out-of-domain input data."""


class ConfigError(BindyError, ValueError):
    """Invalid configuration or hyperparameter."""


class DegenerateColumnError(InputError):
    """A library column cannot be normalized (zero variance)."""

    def __init__(self, label):
        super().__init__(f"library column {label!r} has zero variance and cannot be normalized")
        self.label = label


class NumericalError(BindyError, ArithmeticError):
    """A factorization or linear solve failed.

    ``model`` carries the hex mask of the offending model when known and
    ``iteration`` the sampler iteration at which it happened.
    """

    def __init__(self, message, model=None, iteration=None):
        parts = [message]
        if model is not None:
            parts.append(f"model={model}")
        if iteration is not None:
            parts.append(f"iteration={iteration}")
        super().__init__(", ".join(parts))
        self.model = model
        self.iteration = iteration


class DegeneratePosteriorError(NumericalError):
    """An inverse-gamma posterior with non-positive shape or scale."""


class IngestionError(InputError):
    """A data file failed validation."""
