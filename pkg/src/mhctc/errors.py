"""Exception types shared across the package."""


class MhctcError(Exception):
    """Base class for all package errors."""


class InvalidLabel(MhctcError):
    """A transcription contains an index outside [1, n_symbols]."""


class InvalidInput(MhctcError):
    """Malformed numeric input (non-finite values, unnormalized rows, ...)."""


class InfeasibleAlignment(MhctcError):
    """The transcription cannot be aligned to the available frames.

    ``hypothesis_index`` is set when the failure came from one hypothesis
    within a multi-hypothesis set, so callers can implement skip policies.
    """

    def __init__(self, msg, hypothesis_index=None):
        super().__init__(msg)
        self.hypothesis_index = hypothesis_index


class OracleTooLarge(MhctcError):
    """Brute-force enumeration would exceed the safety guard."""


class ShapeError(MhctcError):
    """Array shape does not match the model or operation contract."""


class DivergedError(MhctcError):
    """Training produced a non-finite loss. Carries the epoch index."""

    def __init__(self, msg, epoch=None):
        super().__init__(msg)
        self.epoch = epoch


class TooShort(MhctcError):
    """Waveform shorter than one analysis frame."""


class SizeError(MhctcError):
    """Requested split sizes exceed the corpus size."""


class ConfigError(MhctcError):
    """Invalid or inconsistent configuration."""
