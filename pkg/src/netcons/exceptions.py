"""Exception hierarchy.

Every error raised for invalid user input derives from :class:`SpecError`,
which the CLI maps to exit code 2.
"""


class NetconsError(Exception):
    """Base class for all package errors."""


class SpecError(NetconsError, ValueError):
    """A network description violates a structural requirement."""


class NotSPD(SpecError):
    pass


class NotPSD(SpecError):
    pass


class NotSymmetric(SpecError):
    pass


class DisconnectedGraph(SpecError):
    pass


class NoDampedNode(SpecError):
    pass


class NoUndampedNode(SpecError):
    pass


class DimensionMismatch(NetconsError, ValueError):
    pass


class AmbientMismatch(DimensionMismatch):
    pass


class SingularDampedBlock(NetconsError, ArithmeticError):
    """The damped block of the Laplacian could not be factored."""


class StepTooLarge(NetconsError, ValueError):
    pass
