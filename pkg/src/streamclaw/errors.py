"""Exception types shared across the runtime."""


class StreamclawError(Exception):
    """Base class for all runtime errors."""


class AnchorMissing(StreamclawError):
    """A device-relative timestamp arrived before any time anchor was set."""


class TimestampRegression(StreamclawError):
    """A frame or memory write moved backwards in absolute time."""


class ChunkGap(StreamclawError):
    """Chunk ids were not consecutive."""


class BackendUnavailable(StreamclawError):
    """A remote backend call failed at the transport level."""


class UnknownEntry(StreamclawError):
    """An attention score referenced a cache entry id that does not exist."""


class UnparseableObjective(StreamclawError):
    """A proactive objective matched neither a duration pattern nor a condition mapping."""


class InvalidTimeRange(StreamclawError):
    """end_time must be larger than start_time."""


class SourceNotFound(StreamclawError):
    """video_cut path did not resolve to a registered frame source."""


class SkillNotFound(StreamclawError):
    """No manifest file for the requested skill, or no loaded skill provides the function."""


class ManifestInvalid(StreamclawError):
    """A skill manifest failed structural validation.

    ``field_path`` names the offending field, e.g. ``output_schemas[0].parameters.required``.
    """

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


class SchemaViolation(StreamclawError):
    """A skill call failed schema validation; lists missing and unknown keys."""

    def __init__(self, function: str, missing=(), unknown=()):
        self.function = function
        self.missing = sorted(missing)
        self.unknown = sorted(unknown)
        super().__init__(
            f"{function}: missing={self.missing} unknown={self.unknown}"
        )


class ScenarioParseError(StreamclawError):
    """A scenario file line could not be parsed; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
