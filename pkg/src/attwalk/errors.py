"""Exception types raised across the package."""


class AttWalkError(Exception):
    """Base class for all package errors."""


# mesh-core
class ParseError(AttWalkError, ValueError):
    pass


class EmptyMesh(AttWalkError, ValueError):
    pass


class DegenerateMesh(AttWalkError, ValueError):
    pass


class DecimationStall(AttWalkError, RuntimeError):
    pass


class UnknownClass(AttWalkError, KeyError):
    pass


# autodiff
class ShapeMismatch(AttWalkError, ValueError):
    pass


class NonFinite(AttWalkError, FloatingPointError):
    pass


class NotScalar(AttWalkError, ValueError):
    pass


# backbone
class EmptySequence(AttWalkError, ValueError):
    pass


# losses
class LabelOutOfRange(AttWalkError, IndexError):
    pass


class SingleClass(AttWalkError, ValueError):
    pass


# eval
class LengthMismatch(AttWalkError, ValueError):
    pass


class DimMismatch(AttWalkError, ValueError):
    pass


# trainer
class InvalidCheckpoint(AttWalkError, ValueError):
    pass


class EmptyDataset(AttWalkError, ValueError):
    pass


class NumericalFailure(AttWalkError, FloatingPointError):
    """Training produced a non-finite loss."""
