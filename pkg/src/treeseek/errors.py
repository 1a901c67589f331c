"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class TreeSeekError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(TreeSeekError):
    """A caller passed a value that violates a documented precondition."""


class NotFoundError(TreeSeekError):
    """A referenced node, goal, or file does not exist."""


class DepthExceededError(TreeSeekError):
    """Attempted to grow the tree past its configured depth bound."""


class DuplicateChildError(TreeSeekError):
    """A sibling with the same normalized subquery already exists."""


class SearchExhaustedError(TreeSeekError):
    """No expandable node remains anywhere in the tree."""


class EmptyChecklistError(TreeSeekError):
    """Checklist text yielded zero goals."""


class ExpansionFailedError(TreeSeekError):
    """A policy backend produced no usable subqueries for a node."""


class NoDocumentsError(TreeSeekError):
    """Summarization was asked to pick from an empty candidate list."""


class ParseFailedError(TreeSeekError):
    """A backend reply could not be coerced into the expected structure."""


class BackendUnavailableError(TreeSeekError):
    """A remote backend kept failing after the configured retries."""


class ConfigurationError(TreeSeekError):
    """Bad config file, missing secret, or a non-retryable endpoint error."""


class TraceIOError(TreeSeekError):
    """A trace file could not be written or read."""


class DatasetError(TreeSeekError):
    """A benchmark dataset file is missing or malformed."""


class SearchAbortedError(TreeSeekError):
    """A search died mid-flight; the partial trace (if any) is preserved.

    ``trace_path`` points at the partial trace when one was being written.
    """

    def __init__(self, message: str, trace_path: str | None = None):
        super().__init__(message)
        self.trace_path = trace_path
