"""Exception types raised by the library.

The CLI maps these onto exit codes: configuration problems exit with 2,
stability violations with 3, numeric guards (aliasing, tails, truncation)
with 4.
"""


class CTRWError(Exception):
    """Base class for all library errors."""


class ConfigError(CTRWError, ValueError):
    """Invalid experiment or CLI configuration."""


class StabilityViolation(CTRWError):
    """The stay-put probability q_0 is negative for the requested step."""


class HistoryMissing(CTRWError):
    """A coefficient table is too short for the requested time step."""


class NumericGuardError(CTRWError):
    """A numerical accuracy guard failed."""


class TruncationTooCoarse(NumericGuardError):
    """The neglected part of a lattice sum exceeds the requested tolerance."""


class AliasingError(NumericGuardError):
    """The frequency cutoff of an FFT inversion leaves too much spectral mass."""


class TailError(NumericGuardError):
    """A truncated Laplace sum has not decayed far enough."""
