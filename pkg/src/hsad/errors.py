"""Exception types shared across the toolkit."""


class HSADError(Exception):
    """Base class for toolkit failures that are not plain argument errors."""


class WavFormatError(HSADError):
    """Malformed RIFF/WAVE container."""


class UnsupportedCodecError(HSADError):
    """WAV file uses a sample encoding or channel layout we do not read."""


class CodecError(HSADError):
    """External codec command failed."""

    def __init__(self, message, returncode=None):
        super().__init__(message)
        self.returncode = returncode


class NumericError(HSADError, ArithmeticError):
    """A non-finite value appeared where finite numbers are required."""


class DataError(HSADError):
    """Manifest or dataset content violates a structural rule."""
