"""Exception hierarchy shared across the package."""
from __future__ import annotations


class ToolScribeError(Exception):
    """Base class for all package errors."""


class MismatchedToolSets(ToolScribeError):
    """Two documentation sets do not cover the same tool names."""


class NotExecutable(ToolScribeError):
    """A tool without an executable binding was called."""


class GatewayError(ToolScribeError):
    """Base class for chat-backend failures."""


class TransportError(GatewayError):
    """Network-level failure after retries were exhausted."""


class ProtocolError(GatewayError):
    """The backend replied with something the wire protocol does not allow."""


class BudgetExceeded(GatewayError):
    """The configured token budget for a run was hit."""


class FixtureExhausted(GatewayError):
    """A scripted backend ran out of queued replies."""


class BackendError(ToolScribeError):
    """An episode aborted on a backend failure.

    Carries the partial trajectory recorded up to the failure.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class UnknownTool(ToolScribeError):
    """A call referenced a tool name the environment does not know."""


class IllegalPosition(ToolScribeError):
    """A FEN string does not describe a legal chess position."""


class IllegalMoveError(ToolScribeError):
    """A move is not legal in the position it was played in."""


class EngineUnavailable(ToolScribeError):
    """The configured chess engine could not be reached or has died."""


class NoLegalMoves(ToolScribeError):
    """Move suggestion was requested in a terminal position."""


class InsufficientCorpus(ToolScribeError):
    """A sampling stratum has fewer positions than its target."""

    def __init__(self, cell, needed: int, available: int):
        super().__init__(f"stratum {cell}: need {needed}, corpus has {available}")
        self.cell = cell
        self.needed = needed
        self.available = available


class EmptyCorpus(ToolScribeError):
    """An index build was attempted over zero documents."""


class JudgeUnavailable(ToolScribeError):
    """Judge-mode answer grading was requested without a backend."""


class EmbedderUnavailable(ToolScribeError):
    """Semantic similarity was requested without an embedder."""


class SchemaError(ToolScribeError):
    """A dataset record failed validation during ingest."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CountMismatch(ToolScribeError):
    """Ingested instance counts disagree with the dataset manifest."""


class UnknownRun(ToolScribeError):
    """A report or eval referenced a run id that was never stored."""
