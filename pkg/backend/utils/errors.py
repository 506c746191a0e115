"""Exception hierarchy shared by every dumpscrub service.

Each error carries the pipeline phase it surfaced in and the CLI exit code it maps to.
"""

from config import EXIT_CONFIG_ERROR, EXIT_PARSE_ERROR, EXIT_RUNTIME_FAILURE


class ScrubError(Exception):
    """Base class for all dumpscrub failures."""

    exit_code = EXIT_RUNTIME_FAILURE

    def __init__(self, message: str, phase: str | None = None):
        super().__init__(message)
        self.message = message
        self.phase = phase

    def with_phase(self, phase: str) -> "ScrubError":
        if self.phase is None:
            self.phase = phase
        return self

    def __str__(self) -> str:
        if self.phase:
            return f"[{self.phase}] {self.message}"
        return self.message


class ConfigError(ScrubError, ValueError):
    """Invalid configuration value; `field` names the offending key."""

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, field: str | None = None, phase: str | None = None):
        super().__init__(f"{field}: {message}" if field else message, phase)
        self.field = field


class DumpParseError(ScrubError, ValueError):
    exit_code = EXIT_PARSE_ERROR

    def __init__(self, message: str, page_index: int | None = None, phase: str | None = None):
        super().__init__(f"page {page_index}: {message}" if page_index is not None else message, phase)
        self.page_index = page_index


class EncodingError(ScrubError, ValueError):
    exit_code = EXIT_PARSE_ERROR

    def __init__(self, message: str, byte_offset: int | None = None, phase: str | None = None):
        super().__init__(f"byte {byte_offset}: {message}" if byte_offset is not None else message, phase)
        self.byte_offset = byte_offset


class KnowledgeBaseError(ScrubError, ValueError):
    exit_code = EXIT_CONFIG_ERROR


class FeedbackError(ScrubError, ValueError):
    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, line: int | None = None, phase: str | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message, phase)
        self.line = line


class GenerationError(ScrubError, ValueError):
    exit_code = EXIT_CONFIG_ERROR


class RedactionError(ScrubError):
    pass


class ReportError(ScrubError):
    pass


class RunCancelled(ScrubError):
    pass
