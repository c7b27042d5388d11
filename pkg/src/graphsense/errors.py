"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class GraphSenseError(Exception):
    """Base class for all library errors."""


# -- gateway -----------------------------------------------------------------


class GatewayError(GraphSenseError):
    pass


class TransportError(GatewayError):
    """Network or server-side failure. Retried by the gateway."""


class ProviderRejection(GatewayError):
    """The provider refused the request shape. Never retried."""


class BudgetExceeded(GatewayError):
    """Prompt is larger than the provider context limit (checked locally)."""


# -- model / pipeline --------------------------------------------------------


class EmptyName(GraphSenseError, ValueError):
    pass


class InvalidConfig(GraphSenseError, ValueError):
    pass


class BatchAborted(GraphSenseError):
    """Every chunk in an extraction batch failed."""


class UnknownEdge(GraphSenseError, KeyError):
    pass


class EmptyGraph(GraphSenseError, ValueError):
    pass


class NoSummaries(GraphSenseError, ValueError):
    pass


class NoIndex(GraphSenseError):
    pass


class QueryFailed(GraphSenseError):
    pass


class JudgeFailed(GraphSenseError):
    pass


class StageFailed(GraphSenseError):
    """An index stage could not be completed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage} failed: {message}")
        self.stage = stage


# -- workspace ---------------------------------------------------------------


class WorkspaceError(GraphSenseError):
    pass


class StageIncomplete(WorkspaceError):
    pass


class CorruptStage(WorkspaceError):
    pass


class WorkspaceLocked(WorkspaceError):
    pass
