"""Exception hierarchy shared by every subsystem."""


class AOPError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(AOPError, ValueError):
    pass


class PreconditionError(AOPError, ValueError):
    pass


class BackendError(AOPError):
    """A chat/embedding/ASR backend failed."""


class TransportError(BackendError):
    pass


class ProtocolError(BackendError):
    pass


class IngestionError(BackendError):
    def __init__(self, message: str, path: str | None = None):
        super().__init__(message if path is None else f"{message}: {path}")
        self.path = path


class AnnotationError(AOPError):
    def __init__(self, message: str, segment_index: int, raw_text: str = ""):
        super().__init__(f"segment {segment_index}: {message}")
        self.segment_index = segment_index
        self.raw_text = raw_text


class MemoryBuildError(AOPError):
    """Raised when a memory build stage fails; carries what was done so far."""

    def __init__(self, stage: str, cause: BaseException, annotated: list | None = None):
        super().__init__(f"memory build failed during {stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.annotated = list(annotated or [])


class ManifestError(AOPError):
    pass


class SchemaVersionError(ManifestError):
    pass


class DispatchError(AOPError):
    pass


class DatasetError(AOPError, ValueError):
    pass


class ScoringError(AOPError, KeyError):
    pass
