"""Exception hierarchy shared by the engine, the service, and the CLI.

Every error carries a ``kind`` used to map failures onto CLI exit codes
(config -> 2, data -> 3, training -> 4) and HTTP error payloads.
"""

from __future__ import annotations


class TagprobeError(Exception):
    """Base class for all engine errors."""

    kind = "data"


class ConfigError(TagprobeError):
    """Bad experiment configuration, CLI flags, or missing inputs."""

    kind = "config"


class DependencyError(ConfigError):
    """A required artifact (e.g. a full-probe model) is missing."""


class ArgumentError(ConfigError):
    """An operation was called with arguments violating its contract."""


class FormatError(TagprobeError):
    """A binary or JSON file does not parse; names the byte offset."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(TagprobeError):
    """A file parsed but violates a semantic invariant."""


class AlignmentError(ValidationError):
    """Clip identifiers of paired tables do not line up."""


class GenerationError(TagprobeError):
    """Synthetic dataset generation could not satisfy its constraints."""


class TrainingError(TagprobeError):
    """Training diverged or produced non-finite losses."""

    kind = "training"


class UndefinedMetricError(TagprobeError):
    """AP/AUC is undefined for the given labels (single-class input)."""


class UndefinedCorrelationError(TagprobeError):
    """Pearson correlation is undefined (constant input vector)."""


class UndefinedShareError(TagprobeError):
    """Block shares are undefined (all-zero weight profile)."""


EXIT_CODES = {"config": 2, "data": 3, "training": 4}


def exit_code_for(kind: str) -> int:
    return EXIT_CODES.get(kind, 1)
