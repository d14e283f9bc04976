"""Exception hierarchy shared by all modules."""


class MosaicError(Exception):
    """Base class for every error raised by slmosaic."""


class InputError(MosaicError):
    """Malformed or missing input data (files, configs, frames)."""


class NumericalError(MosaicError):
    """A computation could not be carried out on otherwise valid input."""


class NonPositiveDepth(NumericalError):
    pass


class DegenerateProjection(NumericalError):
    pass


class DegenerateHomography(NumericalError):
    pass


class ParallelRays(NumericalError):
    pass


class MatchingFailure(NumericalError):
    pass


class InsufficientOverlap(NumericalError):
    pass


class RankDeficient(NumericalError):
    pass


class BehindCamera(NumericalError):
    pass


class DegenerateCloud(NumericalError):
    pass


class CanvasOverflow(NumericalError):
    pass


class OutOfView(NumericalError):
    pass


class InvalidParams(InputError):
    pass


class EmptyPointSet(InputError):
    pass


class DotCountMismatch(UserWarning):
    """Segmentation found a different number of laser dots than expected."""
