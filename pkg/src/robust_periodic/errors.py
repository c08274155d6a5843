"""Exception hierarchy shared across the package."""


class RobustPeriodicError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RobustPeriodicError, ValueError):
    pass


class DimensionMismatch(RobustPeriodicError, ValueError):
    pass


class NonFiniteField(RobustPeriodicError, FloatingPointError):
    pass


class LeftEnclosure(RobustPeriodicError):
    """A trajectory or tube ball left the enclosure region where the bound constants hold.

    ``partial`` optionally carries whatever was computed before the exit
    (a Trace or a Tube), so callers can still export it.
    """

    def __init__(self, message, step=None, partial=None):
        super().__init__(message)
        self.step = step
        self.partial = partial


class ZoneGrowthExceeded(LeftEnclosure):
    pass


class NegativeRadicand(RobustPeriodicError, ArithmeticError):
    pass


class EmptyRegion(RobustPeriodicError, ValueError):
    pass


class InfeasibleNode(RobustPeriodicError):
    pass


class TubeTooShort(RobustPeriodicError, ValueError):
    pass


class OffLattice(RobustPeriodicError, ValueError):
    pass


class NotCertified(RobustPeriodicError):
    pass


class LatticeMismatch(RobustPeriodicError, ValueError):
    pass


class TooShort(RobustPeriodicError, ValueError):
    pass
