"""Domain error types raised across the pipeline."""


class StentfitError(Exception):
    """Base class for all domain errors."""


# volume I/O
class MalformedHeader(StentfitError):
    pass


class SizeMismatch(StentfitError):
    pass


class IoFailure(StentfitError):
    pass


# phantom generation
class GeometryOverflow(StentfitError):
    pass


class DegenerateContrast(StentfitError):
    pass


# sampling / fields
class OutOfBounds(StentfitError):
    pass


# segmentation
class SeedOutsideWindow(StentfitError):
    pass


class EmptyMask(StentfitError):
    pass


# skeleton / centerlines
class NoBifurcation(StentfitError):
    pass


class ExtraBranches(StentfitError):
    pass


# stent model
class CenterlineTooShort(StentfitError):
    pass


class RadiusNonPositive(StentfitError):
    pass


class InvalidConnection(StentfitError):
    pass


# solver
class SingularSystem(StentfitError):
    pass


class NonFiniteState(StentfitError):
    pass


# measurement
class LandmarkOutOfRange(StentfitError):
    pass


class RegionEmpty(StentfitError):
    pass
