"""Exception hierarchy.  Each class maps onto one CLI exit code."""


class ThermolocateError(Exception):
    exit_code = 1


class DomainError(ThermolocateError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 2


class ConfigError(ThermolocateError, ValueError):
    exit_code = 2


class StabilityError(ConfigError):
    """Explicit time step violates the stability bound."""

    exit_code = 4

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class AccuracyError(ThermolocateError, ArithmeticError):
    """Quadrature failed to converge; ``estimate`` holds the last value."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class UndefinedMeanError(DomainError):
    """Circular mean of (nearly) cancelling unit vectors."""


class DataMismatchError(ThermolocateError):
    exit_code = 5


class NoSolutionError(ThermolocateError):
    exit_code = 6
