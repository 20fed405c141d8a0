"""Exception types raised by the library."""


class VPError(Exception):
    """Base class for library errors."""


class DomainError(VPError, ValueError):
    """Query outside the domain where a symbol is holomorphic."""


class DivergentMomentError(VPError, ValueError):
    """Requested velocity moment does not exist for the profile."""


class CertificationError(VPError, RuntimeError):
    """An a-priori bound could not be certified on the test grid."""


class QuadratureError(VPError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class ConvergenceError(VPError, RuntimeError):
    """Newton iteration or continuation failed."""


class InconclusiveError(VPError, RuntimeError):
    """A contour passes too close to a zero to decide the winding number."""


class ConfigError(VPError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class ResolutionError(VPError, RuntimeError):
    """A time or frequency grid is too coarse for the requested accuracy."""
