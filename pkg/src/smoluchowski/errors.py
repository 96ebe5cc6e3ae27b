"""Exception hierarchy shared by every module of the package."""


class SmoluchowskiError(Exception):
    """Base class for all package errors."""


class DomainError(SmoluchowskiError, ValueError):
    """A volume, time or parameter lies outside the admissible domain."""


class ConfigError(SmoluchowskiError, ValueError):
    """A run configuration is missing, malformed or inconsistent."""


class DataError(SmoluchowskiError, ValueError):
    """Input data (densities, tables) are negative or not integrable."""


class NumericalError(SmoluchowskiError, ArithmeticError):
    """A non-finite value appeared during evaluation."""


class StiffnessError(NumericalError):
    """Positivity could not be kept without shrinking the step below ``dt_min``."""


class BlowUpError(SmoluchowskiError, ArithmeticError):
    """A moment ODE was evaluated at or past its blow-up (gelation) time."""

    def __init__(self, message: str, gelation_time: float):
        super().__init__(message)
        self.gelation_time = gelation_time
