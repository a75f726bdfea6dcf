"""Exception hierarchy for the hahog toolkit."""


class HahogError(Exception):
    """Base class for all toolkit errors."""


class FrameLoadError(HahogError):
    """Base class for depth raster loading failures."""


class MalformedHeaderError(FrameLoadError):
    """Raster header is not a valid 16-bit P5 header."""


class TruncatedPayloadError(FrameLoadError):
    """Raster payload is shorter or longer than width x height samples."""


class MissingSidecarError(FrameLoadError):
    """The JSON sidecar next to the raster does not exist or is unreadable."""


class ModelFormatError(HahogError):
    """Model file has a bad magic, inconsistent shapes, or is truncated."""


class ConfigError(HahogError):
    """Invalid or mismatched configuration."""


class DimensionError(HahogError):
    """An input raster or field is too small for the requested operation."""


class BoundsError(HahogError):
    """A window or point lies outside the frame."""


class SceneGenerationError(HahogError):
    """Synthetic placement could not satisfy the spacing constraints."""


class DataError(HahogError):
    """Bad training data: empty class, non-finite features, unknown ids."""


class VerdictConflictError(HahogError):
    """A frame was re-submitted with a different verdict."""
