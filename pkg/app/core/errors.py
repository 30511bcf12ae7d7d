"""
Error hierarchy shared by the DSP modules, the CLI and the HTTP service.

Every error carries the process exit code the CLI reports for it; the
HTTP layer maps the same classes onto status codes in `app.main`.
"""


class HarmonicGateError(Exception):
    """Base class for all domain errors raised by this package."""
    exit_code = 1


class UsageError(HarmonicGateError):
    """Invalid flags or configuration values."""
    exit_code = 2


class InputFormatError(HarmonicGateError):
    """Unreadable or unsupported input (audio, matrices, paired inputs that don't line up)."""
    exit_code = 3


class ShapeError(InputFormatError):
    """Operator inputs whose shapes don't agree."""


class NumericError(HarmonicGateError):
    """A numeric precondition was violated (negative magnitudes, gate out of range, ...)."""
    exit_code = 4
