class ExtractorError(Exception):
    """Base class for bridge failures."""


class ExtractorUnavailableError(ExtractorError):
    """A pretrained backend (or its weights) is not installed."""


class AudioDecodeError(ExtractorError):
    """A clip could not be decoded; callers skip and log it."""


class DimsMismatchError(ExtractorError):
    """Model produced frames of the wrong width; always fatal."""


class VerificationError(ExtractorError):
    """An FSE1 file failed verification; carries the first bad offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
