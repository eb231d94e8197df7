# errors.py
from typing import Optional


class HarnessError(Exception):
    """Base class for every error raised by the evaluation harness."""
    exit_code = 2


class InputError(HarnessError):
    """Raised when user-supplied data or arguments are unusable."""
    exit_code = 1


class FormatError(InputError):
    """Raised when a text artifact (embeddings, trials, scores, points) is malformed."""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location += f"{path}: "
        if line_number is not None:
            location += f"line {line_number}: "
        super().__init__(f"{location}{message}")


class ProtocolError(InputError):
    """Raised when a trial protocol references missing data or cannot be built."""
    pass


class ConfigError(InputError):
    """Raised when a configuration key is missing or carries an invalid value."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        prefix = f"[{key}] " if key else ""
        super().__init__(f"{prefix}{message}")


class InsufficientDataError(InputError):
    """Raised when there is not enough data for a computation (EER, line fit, LDA)."""
    pass


class InvariantViolation(HarnessError):
    """Raised when an internal invariant is broken (a bug, not bad input)."""
    exit_code = 2
