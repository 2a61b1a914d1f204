"""Exception types raised across the navigation stack."""


class AdpError(Exception):
    """Base class for all package errors."""


class ConnectivityFailure(AdpError):
    """No start-goal connected world or path could be found."""


class NonPositiveDt(AdpError, ValueError):
    pass


class InvalidParams(AdpError, ValueError):
    pass


class NoFeasibleTrajectory(AdpError):
    """Every sampled trajectory collided."""


class ShapeMismatch(AdpError, ValueError):
    pass


class InsufficientData(AdpError):
    pass


class InvalidInput(AdpError, ValueError):
    pass


class ConfigError(AdpError, ValueError):
    pass
