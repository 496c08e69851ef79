"""Exception hierarchy shared by every module of the package."""


class TeleopError(Exception):
    """Base class for all errors raised by teleop_sim."""


class ConfigError(TeleopError, ValueError):
    pass


class ArityError(TeleopError, ValueError):
    pass


class ConstructionError(TeleopError, ValueError):
    """A value type was built from invalid (e.g. non-finite) data."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GainError(TeleopError, ValueError):
    pass


class SamplerError(TeleopError, ValueError):
    pass


class IntegrationError(TeleopError, ArithmeticError):
    """Raised when the arm dynamics produce a non-finite state."""

    def __init__(self, message, tick=None, trace=None):
        super().__init__(message)
        self.tick = tick
        self.trace = trace


class ShapeError(TeleopError, ValueError):
    pass


class DegenerateError(TeleopError, ValueError):
    pass


class InsufficientDataError(TeleopError, ValueError):
    pass
