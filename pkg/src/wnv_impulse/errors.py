"""Exception hierarchy shared by the simulation, orbit and CLI layers."""


class WNVError(Exception):
    """Base class for all package errors."""


class ConfigError(WNVError, ValueError):
    """Bad configuration file or out-of-domain parameter value."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class NumericalError(WNVError):
    """A numerical procedure failed to deliver a trustworthy answer."""


class IntegrationError(NumericalError):
    """The adaptive integrator could not continue (e.g. step-size underflow)."""

    def __init__(self, message, t=None, y=None):
        self.t = t
        self.y = y
        detail = "" if t is None else f" (t={t!r}, y={list(y) if y is not None else None})"
        super().__init__(message + detail)


class NoBracketError(NumericalError):
    """The return-map residual does not change sign on the search interval."""

    def __init__(self, message, samples=()):
        self.samples = tuple(samples)
        super().__init__(f"{message}; sampled (x, g(x)) = {list(self.samples)}")


class SingularKappaError(NumericalError):
    """Denominator of the jump factor vanishes (flow tangent to the guard)."""


class NoHitError(WNVError):
    """The flow never reached the impulsive set where a hit was required."""
