"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit-specific failures."""


class OutOfBoundsError(ToolkitError):
    """A crop or coordinate fell outside the image raster."""


class EmptyPoolError(ToolkitError):
    """Augmentation policy configured with an empty transform pool."""


class SingularBasisError(ToolkitError):
    """Stain basis matrix is not invertible."""


class EmptyInputError(ToolkitError):
    """An operation that needs at least one element received none."""


class TooFewImagesError(ToolkitError):
    """A scanner group has fewer images than requested folds."""


class EmptySplitError(ToolkitError):
    """Patch sampling asked to draw from an empty (or annotation-free) split."""


class UnsatisfiableCropError(ToolkitError):
    """No crop origin can contain the selected annotation."""


class EmptyGroundTruthError(ToolkitError):
    """Anchor fitness evaluated against zero ground-truth boxes."""


class InvalidBoundsError(ToolkitError):
    """Degenerate or inverted search bounds."""


class ImageSmallerThanTileError(ToolkitError):
    """Tiling requested on an image smaller than one tile."""


class DetectorFailureError(ToolkitError):
    """Wraps a detector exception with the tile origin it occurred at."""

    def __init__(self, origin: tuple[int, int], cause: BaseException):
        super().__init__(f"detector failed on tile at origin {origin}: {cause!r}")
        self.origin = origin
        self.cause = cause


class SchemaError(ToolkitError):
    """Manifest or config file violates the documented schema."""


class ShapeError(ToolkitError):
    """A buffer arrived with an incompatible shape or dtype."""


class PolicyParseError(ToolkitError):
    """A policy mapping referenced an unknown transform or bad value."""
