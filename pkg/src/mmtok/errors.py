"""Exception hierarchy shared by the library and the CLI.

Every error carries a stable ``kind`` string and a distinct process exit
code so CLI callers can dispatch on failures without parsing messages.
"""

from __future__ import annotations


class MMTokError(Exception):
    """Base class for all toolkit errors."""

    kind = "error"
    exit_code = 1


class InvalidConfigError(MMTokError):
    """A configuration value violates its documented constraints."""

    kind = "invalid-config"
    exit_code = 3


class InputShapeError(MMTokError):
    """Input data does not have the dimensions or ids the operation requires."""

    kind = "input-shape"
    exit_code = 4


class OversizeSampleError(MMTokError):
    """A sample exceeds the pack capacity and can never be placed."""

    kind = "oversize-sample"
    exit_code = 5


class InvalidSampleError(MMTokError):
    """A sample record violates its field invariants."""

    kind = "invalid-sample"
    exit_code = 6


class ProtocolError(MMTokError):
    """A token stream violates the decode protocol (bad marker nesting, tokens after DONE)."""

    kind = "protocol"
    exit_code = 7


class CalibrationDataError(MMTokError):
    """Calibration or measurement input contains non-finite values."""

    kind = "calibration-data"
    exit_code = 8


class DegenerateTensorError(MMTokError):
    """A tensor is all zeros, so no quantization scale can be derived."""

    kind = "degenerate-tensor"
    exit_code = 9


class SchemaError(MMTokError):
    """An input file does not match its documented schema."""

    kind = "malformed-schema"
    exit_code = 10


class IOFailureError(MMTokError):
    """Reading or writing an artifact failed at the OS level."""

    kind = "io-failure"
    exit_code = 11
