"""Domain error type shared by every module.

Errors carry a stable machine-readable ``code`` (the names used throughout
the package: EMPTY_FILE, NO_RELEVANT_DOCS, UNKNOWN_SESSION, ...) plus a
human message and optional structured details. The HTTP layer maps codes to
status lines; the CLI maps them to exit code 1.
"""

from __future__ import annotations

from typing import Any


class WorkbenchError(Exception):
    """A domain error with a stable code."""

    def __init__(self, code: str, message: str, details: dict[str, Any] | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details or {}

    def to_json(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}
