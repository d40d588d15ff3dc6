"""Exception types shared across the toolkit."""


class LidarBevError(Exception):
    """Base class for all toolkit errors."""


class TruncatedFileError(LidarBevError):
    """File length is not a whole number of records."""


class NonFiniteValueError(LidarBevError):
    """NaN or Inf encountered where finite values are required."""


class CountMismatchError(LidarBevError):
    """Record count disagrees with the expected count."""


class MalformedLineError(LidarBevError):
    """Text line does not match the expected field layout."""


class NonOrthonormalRotationError(LidarBevError):
    """Rotation matrix fails the orthonormality or determinant check."""


class OriginPointError(LidarBevError):
    """Point at the sensor origin: spherical angles are undefined."""


class ShapeMismatchError(LidarBevError):
    """Array shapes are inconsistent for the requested operation."""


class ContainerFormatError(LidarBevError):
    """Grid container file has a bad magic, tag, or payload size."""


class NonFiniteActivationError(LidarBevError):
    """Forward pass produced NaN or Inf activations."""


class MissingCacheError(LidarBevError):
    """Backward pass requested but forward intermediates were not kept."""


class MissingRoleError(LidarBevError):
    """Dataset specs do not provide exactly one spec per task role."""


class LengthMismatchError(LidarBevError):
    """Vector length disagrees with the configured bin count."""


class DegenerateBoxError(LidarBevError):
    """Box has non-positive width or length."""


class DomainError(LidarBevError):
    """Input outside the mathematical domain of the function."""


class ConfigError(LidarBevError):
    """Run configuration failed schema validation."""
