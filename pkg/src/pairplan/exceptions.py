"""pairplan error types."""

from pathlib import Path

from .const import ERROR_CODES


class PairPlanError(Exception):
    """Base exception for pairplan errors."""

    def __init__(self, message: str, error_code: int | None = None) -> None:
        """Initialize the exception.

        Args:
            message: The error message
            error_code: Optional error code from error_codes dict

        """
        if error_code is not None and error_code in ERROR_CODES:
            message = f"{message}: {ERROR_CODES[error_code]}"
        super().__init__(message)


class ConfigurationError(PairPlanError):
    """Invalid or inconsistent configuration."""

    def __init__(self, message: str) -> None:
        """Initialize the exception."""
        super().__init__(message, 0x01)


class PairPlanIOError(PairPlanError):
    """A file or directory could not be read or written."""

    def __init__(self, message: str, path: Path | str) -> None:
        """Initialize the exception with the offending path."""
        self.path = Path(path)
        super().__init__(f"{message} ({self.path})", 0x06)
