"""Exception hierarchy shared by every barystab module."""


class BarystabError(Exception):
    """Base class for all library errors."""


class InvalidMeasureError(BarystabError, ValueError):
    """A measure or population violates its construction invariants."""


class NegativeWeight(InvalidMeasureError):
    pass


class ZeroTotalMass(InvalidMeasureError):
    pass


class PointOutsideDomain(InvalidMeasureError):
    pass


class AllZeroDensity(InvalidMeasureError):
    pass


class DomainMismatch(InvalidMeasureError):
    pass


class WrongDimension(BarystabError, ValueError):
    pass


class SizeCapExceeded(BarystabError):
    """Problem size is above the configured cap of the exact solver."""


class SolverNotConverged(BarystabError):
    """An iterative or LP solver stopped without meeting its tolerance."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


# short alias used throughout the solvers
NotConverged = SolverNotConverged


class NumericalUnderflow(BarystabError):
    """Scaling-domain Sinkhorn underflowed; retry in log domain or with larger epsilon."""


class NonDeterministicPlan(BarystabError):
    """A plan row splits mass over several targets, so no map surrogate exists."""


class NonOptimalPotential(BarystabError, ValueError):
    pass


class DisconnectedSupport(BarystabError, ValueError):
    pass


class NonPositiveSample(BarystabError, ValueError):
    pass


class OutOfRegime(BarystabError, ValueError):
    """Family parameters outside the range where the closed forms hold."""


class MissingColumn(BarystabError, KeyError):
    pass


class NonPositiveLogData(BarystabError, ValueError):
    pass


class BadConfig(BarystabError, ValueError):
    pass
