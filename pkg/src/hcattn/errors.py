"""Exception hierarchy shared across the package."""


class HCAttnError(Exception):
    """Base class for all errors raised by hcattn."""


class ConfigError(HCAttnError, ValueError):
    """Invalid configuration or argument combination."""


class ShapeError(HCAttnError, ValueError):
    """Array shapes are inconsistent with each other or with a config."""


class NonFiniteError(HCAttnError, ValueError):
    """An input that must be finite contains NaN or inf."""


class TensorFormatError(HCAttnError):
    """Base class for malformed tensor or codebook files."""


class BadMagicError(TensorFormatError):
    pass


class UnsupportedVersionError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class EmptyCacheError(HCAttnError):
    """Decode was requested against a cache with no tokens."""


class UntrainedCodebookError(HCAttnError):
    """Key quantization requested without a trained codebook."""
