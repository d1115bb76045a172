"""Exception hierarchy.

Every error raised by the package derives from :class:`LinkGapError` so a
caller (the CLI in particular) can separate validation failures from I/O
problems.
"""


class LinkGapError(ValueError):
    pass


# complex / group action
class InvalidComplex(LinkGapError):
    pass


class NonPure(InvalidComplex):
    pass


class DisconnectedLink(InvalidComplex):
    def __init__(self, vertex, msg=None):
        self.vertex = vertex
        super().__init__(msg or f"link of vertex {vertex} is disconnected")


class NonPositiveWeight(InvalidComplex):
    pass


class UnknownVertex(LinkGapError):
    pass


class NotAutomorphism(LinkGapError):
    pass


class WeightNotInvariant(LinkGapError):
    pass


class GroupTooLarge(LinkGapError):
    pass


class InvariantViolation(LinkGapError):
    pass


# spaces
class DimensionMismatch(LinkGapError):
    pass


class ForeignPoint(LinkGapError):
    pass


class ParameterOutOfRange(LinkGapError):
    pass


# energy
class SpaceMismatch(LinkGapError):
    pass


class RepresentationMismatch(LinkGapError):
    pass


class NoConvergence(LinkGapError):
    pass


# gap / fixed point
class Disconnected(LinkGapError):
    pass


class TooSmall(LinkGapError):
    pass


class AllSamplesDegenerate(LinkGapError):
    pass


class UnsupportedSpace(LinkGapError):
    pass


class UnsupportedMethod(LinkGapError):
    pass


class NotEquivariant(LinkGapError):
    pass
