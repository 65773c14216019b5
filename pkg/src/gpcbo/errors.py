"""Exception types shared across the package."""


class GpcboError(Exception):
    """Base class for all package errors."""


class InputDomainError(GpcboError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConditioningError(GpcboError, ArithmeticError):
    """A covariance matrix could not be factorized even after jitter escalation."""

    def __init__(self, message, stage=None, points=None):
        super().__init__(message)
        self.stage = stage
        self.points = points


class SimulationBlowUp(GpcboError, FloatingPointError):
    """The ODE state became non-finite during integration."""


class ConfigError(GpcboError, ValueError):
    """A run configuration failed validation."""


class NumericalFailure(GpcboError, ArithmeticError):
    """The optimizer could not produce finite agents or costs."""
