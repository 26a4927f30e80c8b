"""Exception hierarchy shared by every skelot module."""


class SkelotError(Exception):
    """Base class for all library errors."""


class MalformedInput(SkelotError):
    """Input document violates its schema.

    ``location`` carries a ``line:column`` string for JSON syntax errors or a
    JSON path for schema errors.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class DegenerateFace(SkelotError):
    pass


class InconsistentGluing(SkelotError):
    pass


class ZeroMass(SkelotError):
    pass


class FaceMissing(SkelotError):
    pass


class FaceMismatch(SkelotError):
    pass


class DegreeMismatch(SkelotError):
    pass


class PNotInBody(SkelotError):
    pass


class NoLatticePoint(SkelotError):
    pass


class NonUniqueGradient(SkelotError):
    pass


class EmptySemigroup(SkelotError):
    pass


class ShrunkToPoint(SkelotError):
    pass


class DimensionNot1(SkelotError):
    pass


class GenerationFailed(SkelotError):
    pass


class NonConvergence(SkelotError):
    """Solver hit ``max_iter``; the best iterate travels with the exception."""

    def __init__(self, message, potential=None, certificate=None):
        super().__init__(message)
        self.potential = potential
        self.certificate = certificate
