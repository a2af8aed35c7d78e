"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class RegimeError(ValueError):
    """Requested quantity does not exist in this exponent regime."""


class InsufficientDataError(ValueError):
    """Too few usable points for a fit."""


class NonLoggableDataError(ValueError):
    """A value that must be fitted in log space is zero or negative."""


class PhysicalityError(ValueError):
    """A state violates a quantum physicality bound beyond tolerance."""


class IntegrationFailure(RuntimeError):
    """Adaptive integration could not meet its tolerance contract.

    Carries the last time reached before the failure in ``t_last``.
    """

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last good time t={t_last:.6g})")
        self.t_last = t_last


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
