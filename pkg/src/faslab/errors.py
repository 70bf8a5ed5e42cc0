"""Shared exception types."""


class ConfigError(ValueError):
    """A configuration field failed validation; the message names the field."""


class FileFormatError(ValueError):
    """A dataset or model file has a bad magic string, version, or layout."""


class ChecksumError(FileFormatError):
    """Stored checksum does not match the file contents (corruption/truncation)."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")
