"""Error types raised by the library; the CLI maps each family of errors to an exit code."""
import settings


class GLNEMError(Exception):
    """Base class for every error raised on purpose by this package."""

    exit_code = 1
    kind = "internal"


class ConfigError(GLNEMError, ValueError):
    """Invalid configuration: bad hyperparameters, unknown family/link pairing, bad CLI options."""

    exit_code = settings.EXIT_CONFIG_ERROR
    kind = "config"


class DataError(GLNEMError, ValueError):
    """Malformed or out-of-support network data."""

    exit_code = settings.EXIT_DATA_ERROR
    kind = "data"


class NumericalError(GLNEMError, ArithmeticError):
    """Non-finite values, non-convergent series and similar numerical failures."""

    exit_code = settings.EXIT_NUMERIC_ERROR
    kind = "numeric"


class DegenerateInputError(NumericalError):
    """Rank-deficient input to a matrix construction."""


class InitializationError(NumericalError):
    """The initialization chain diverged on almost every iteration."""
