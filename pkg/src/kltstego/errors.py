"""Exception types shared across the package."""


class StegoError(Exception):
    """Base class for all kltstego errors."""


class CapacityError(StegoError):
    """Payload does not fit in the carrier at the requested depth.

    ``required_bits``/``available_bits`` describe the failed embedding;
    ``suggestion`` is a human-readable hint (smaller rank, deeper bits)
    when one exists.
    """

    def __init__(self, message: str, required_bits: int = 0,
                 available_bits: int = 0, suggestion: str = ""):
        super().__init__(message)
        self.required_bits = required_bits
        self.available_bits = available_bits
        self.suggestion = suggestion


class PayloadFormatError(StegoError):
    """Base class for extraction/parsing failures (corrupt or alien data)."""


class MagicMismatchError(PayloadFormatError):
    """The image does not carry the expected preamble magic."""


class UnsupportedVersionError(PayloadFormatError):
    """Preamble parsed, but the version or bit depth is not supported."""


class CorruptPayloadError(PayloadFormatError):
    """Bitstream violates the wire format (truncation, bad invariants)."""


class ConvergenceError(StegoError):
    """Eigensolver failed to converge (non-symmetric or pathological input)."""


class ImageFormatError(StegoError, OSError):
    """Image file is not one of the supported lossless formats."""
