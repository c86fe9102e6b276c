"""Exception hierarchy shared by every stage of the pipeline."""


class VocalFoldError(Exception):
    """Base class for all errors raised by this package."""

    #: process exit code used by the command-line interface
    exit_code = 2


class DomainError(VocalFoldError, ValueError):
    """Input outside the domain an operation is defined on."""


class ConfigError(VocalFoldError, ValueError):
    """Invalid configuration file, region table or option."""

    exit_code = 1


class NumericalError(VocalFoldError, ArithmeticError):
    """Base class for failures of the numerical machinery."""

    exit_code = 3


class DivergenceError(NumericalError):
    """A forward or backward integration blew up.

    Parameters
    ----------
    message : str
        Human readable description.
    time : float
        Dimensionless time at which the first offending value appeared.
    """

    def __init__(self, message, time):
        super().__init__(f"{message} (t={time:.6g})")
        self.time = float(time)


class EntrainmentError(NumericalError):
    """Too few Poincare crossings to determine the entrainment ratio."""


class ClassificationError(NumericalError):
    """The attractor of a trajectory cannot be classified."""


class GridMismatchError(DomainError):
    """Two sampled quantities do not live on the same time grid."""


class SignalError(VocalFoldError):
    """Base class for problems with audio input."""


class NoVoicingError(SignalError):
    """The signal carries no detectable periodic (voiced) content."""


class WavFormatError(SignalError):
    """Base class for unreadable WAV files."""


class UnsupportedEncodingError(WavFormatError):
    """Sample format other than 16-bit PCM or 32-bit float."""


class CorruptWavError(WavFormatError):
    """Malformed RIFF/WAVE header or truncated data chunk."""


class EmptyAudioError(WavFormatError):
    """The data chunk holds no samples."""
