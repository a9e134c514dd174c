"""Exception types raised across the package."""


class PixelVQError(Exception):
    """Base class for every error raised by pixelvq."""


class DimensionError(PixelVQError, ValueError):
    """A tensor has the wrong shape along a named axis."""


class StaleTapeError(PixelVQError, RuntimeError):
    """``backward`` was called on a graph that has already been consumed."""


class DegenerateBatchError(PixelVQError, ValueError):
    """Batch statistics requested on a batch that is too small."""


class GeometryError(PixelVQError, ValueError):
    """Input side length is incompatible with the number of scaling blocks."""


class CapabilityError(PixelVQError, ValueError):
    """A model configuration cannot be built without an enhancement."""


class ManifestIntegrityError(PixelVQError, ValueError):
    """A sprite manifest violates the entity-safe split invariant or is malformed."""


class ImageDecodeError(PixelVQError, IOError):
    """An image referenced by a manifest could not be decoded."""


class CompatibilityError(PixelVQError, ValueError):
    """Two artifacts (checkpoints, corpora, configs) do not fit together."""


class TrainingDiverged(PixelVQError, FloatingPointError):
    """A non-finite loss was produced during training."""


class CausalityViolation(PixelVQError, AssertionError):
    """A masked autoregressive model leaks information from the future."""


class CheckpointFormatError(PixelVQError, ValueError):
    """A checkpoint file is corrupt, has a wrong magic, or a wrong version."""


class ConfigError(PixelVQError, ValueError):
    """A run configuration is malformed or contains unknown keys."""


class RangeError(PixelVQError, IndexError):
    """An integer index (class label, codebook encoding) is out of range."""
