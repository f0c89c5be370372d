"""Exception hierarchy shared across the toolkit."""


class NakmapError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(NakmapError, ValueError):
    """Arguments violate a precondition (shape mismatch, out-of-range, ...)."""


class DomainError(NakmapError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. r <= 0)."""


class DegenerateWindowError(NakmapError):
    """Sample window carries no usable information (zero variance, delta ~ 0)."""


class NumericError(NakmapError):
    """Numerical procedure failed (non-convergence, non-finite intermediate)."""


class TrainingFailureError(NumericError):
    """Score-model training diverged."""


class FormatError(NakmapError):
    """Malformed or unsupported on-disk artifact."""


class ConfigError(NakmapError):
    """Invalid experiment configuration."""


class DataError(NakmapError):
    """Missing or inconsistent input data files."""
