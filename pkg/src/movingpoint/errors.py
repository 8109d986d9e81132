"""Exception hierarchy.

Every numerical guard raises a subclass of :class:`NumericalGuardError`; the
CLI maps those to exit status 3 and records the class name in the report.
"""


class NumericalGuardError(ArithmeticError):
    """Base class for guards that refuse to return an unreliable number."""


class BranchCutError(NumericalGuardError):
    pass


class SingularPointError(NumericalGuardError):
    pass


class PoleError(NumericalGuardError):
    pass


class ResolventSetError(NumericalGuardError):
    pass


class DegenerateCouplingError(NumericalGuardError):
    pass


class UnderResolvedError(NumericalGuardError):
    pass


class ChargeFitError(NumericalGuardError):
    pass


class BoxTooSmallError(NumericalGuardError):
    pass


class SizeGuardError(NumericalGuardError):
    pass


class GridMismatchError(ValueError):
    pass


class FlavorMismatchError(ValueError):
    pass


class MisalignedTimeError(ValueError):
    pass
