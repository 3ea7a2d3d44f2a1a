"""Exception types raised across the package."""


class QuadflatError(Exception):
    pass


class NonSkewInput(QuadflatError, ValueError):
    pass


class DegenerateHeading(QuadflatError, ValueError):
    """Body x-axis is (nearly) vertical, so no heading exists."""


class NotNearRotation(QuadflatError, ValueError):
    pass


class ZeroThrustSingularity(QuadflatError, ArithmeticError):
    pass


class ZeroForceSingularity(QuadflatError, ArithmeticError):
    pass


class FlipOverSingularity(QuadflatError, ArithmeticError):
    """A heading-constraint denominator vanished (vehicle about to flip)."""


class OutOfDomain(QuadflatError, ValueError):
    pass


class NonConjugateClosure(QuadflatError, ValueError):
    pass


class WrongOrder(QuadflatError, ValueError):
    pass


class NotALeader(QuadflatError, ValueError):
    pass


class MissingNeighbor(QuadflatError, KeyError):
    pass


class EmptyLog(QuadflatError, ValueError):
    pass


class ConfigError(QuadflatError, ValueError):
    pass


class UnsafeTransform(UserWarning):
    """Formation transform violates the collision-avoidance eigenvalue bound."""
