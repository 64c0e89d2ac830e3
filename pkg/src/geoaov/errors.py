"""Exception types shared across the engine."""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EngineError):
    """Malformed text that was expected to be a structured document."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.message = message
        self.position = position


class SchemaError(EngineError):
    """Well-formed document with missing, extra, or mistyped keys."""


class CyclicGraph(EngineError):
    """The workflow graph contains a dependency cycle."""


class TransportError(EngineError):
    """Network-level failure talking to a chat-completion endpoint; retryable."""


class ProtocolError(EngineError):
    """The endpoint answered, but the response body was not understood."""


class AuthError(EngineError):
    """Missing or rejected API credentials."""


class JudgeFormatError(EngineError):
    """The judge model failed to produce a usable 1-5 score."""


class ScriptMismatch(EngineError):
    """A scripted backend received a request its next entry does not match."""


class BadAssertionPath(EngineError):
    """A final-state assertion has a malformed path or comparator."""


class PlanningFailed(EngineError):
    """Workflow generation exhausted its repair budget."""

    def __init__(self, message: str, last_violations: list[str] | None = None):
        self.last_violations = last_violations or []
        if self.last_violations:
            message = message + ": " + "; ".join(self.last_violations)
        super().__init__(message)


class RefinementFailed(EngineError):
    """Workflow refinement exhausted its budget."""


class MismatchedTaskSets(EngineError):
    """Aggregation was asked to compare cells scored on different task sets."""


class SuiteError(ParseError):
    """A task-suite file failed to load."""

    def __init__(self, message: str, task_id: str | None = None, field_path: str | None = None):
        detail = message
        if task_id is not None:
            detail = f"task {task_id!r}: {detail}"
        if field_path is not None:
            detail = f"{detail} (field {field_path})"
        super().__init__(detail)
        self.task_id = task_id
        self.field_path = field_path
