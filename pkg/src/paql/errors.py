"""Error types shared across the engine.

Every error carries a stable ``code`` string; the HTTP layer and the CLI map
codes to status codes / exit codes without inspecting messages.
"""

from __future__ import annotations

from typing import Optional, Tuple


class PaqlError(Exception):
    """Base class for all engine errors.

    Attributes:
        code: stable machine-readable name (e.g. ``"SYNTAX_ERROR"``).
        position: optional (line, column), 1-based, for errors tied to
            a location in query text or a CSV stream.
    """

    def __init__(self, code: str, message: str, position: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.position = position

    def __repr__(self) -> str:
        loc = f" at {self.position[0]}:{self.position[1]}" if self.position else ""
        return f"{type(self).__name__}({self.code}{loc}: {self.message})"


class DataError(PaqlError):
    """CSV ingestion / catalog errors (EMPTY_FILE, RAGGED_ROW, ...)."""


class QuerySyntaxError(PaqlError):
    """Lexing/parsing errors. Carries the set of expected tokens."""

    def __init__(
        self,
        message: str,
        position: Tuple[int, int],
        expected: Tuple[str, ...] = (),
        code: str = "SYNTAX_ERROR",
    ):
        super().__init__(code, message, position)
        self.expected = tuple(expected)


class ValidationError(PaqlError):
    """Semantic query errors found when resolving against a schema."""


class SolveError(PaqlError):
    """Solver / pruning / search errors (DNF_BLOWUP, TOO_LARGE, ...)."""


class SessionError(PaqlError):
    """Exploration-session errors (NOT_IN_PACKAGE, NO_ALTERNATIVE, ...)."""
