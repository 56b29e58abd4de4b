"""Exception hierarchy shared by every module."""


class SimplexAlignError(ValueError):
    """Base class for all validation and numerical errors raised here."""


class ZeroVectorError(SimplexAlignError):
    pass


class DimensionMismatchError(SimplexAlignError):
    pass


class TooFewPointsError(SimplexAlignError):
    pass


class DegenerateTriangleError(SimplexAlignError):
    """Area is at or below the degeneracy threshold; its gradient is undefined."""


class BothZeroError(SimplexAlignError):
    pass


class BatchTooSmallError(SimplexAlignError):
    pass


class ClipTooShortError(SimplexAlignError):
    pass


class DatasetTooSmallError(SimplexAlignError):
    pass


class TooFewCandidatesError(SimplexAlignError):
    pass


class DegenerateImageError(SimplexAlignError):
    pass


class NonPositiveDepthError(SimplexAlignError):
    pass


class BehindCameraError(SimplexAlignError):
    pass


class OutOfBoundsError(SimplexAlignError):
    pass


class NoValidDepthError(SimplexAlignError):
    pass


class LengthMismatchError(SimplexAlignError):
    pass


class EmptyInputError(SimplexAlignError):
    pass


class TooFewModelsError(SimplexAlignError):
    pass


class AllDimensionsDegenerateError(SimplexAlignError):
    pass
