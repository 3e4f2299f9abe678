"""Exception hierarchy for the lexforge pipeline."""

from __future__ import annotations


class LexforgeError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(LexforgeError):
    """A source file or corpus directory could not be loaded."""


class SchemaError(LexforgeError):
    """A structured artifact violates its schema; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigError(LexforgeError):
    """Invalid or incomplete configuration (flags, files, or environment)."""


class ParseError(LexforgeError):
    """Model output yielded no usable question/answer pairs."""


class TransportError(LexforgeError):
    """HTTP request failed after exhausting retries."""

    def __init__(self, message: str, status: int | None = None, attempts: int = 0):
        super().__init__(message)
        self.status = status
        self.attempts = attempts


class ProtocolError(LexforgeError):
    """Endpoint answered, but not in the chat-completions shape we expect."""


class ArtifactError(LexforgeError):
    """A pipeline step is missing a prerequisite artifact or would overwrite one."""
