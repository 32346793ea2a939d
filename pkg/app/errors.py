from typing import Any, Optional


class KMSGraphError(Exception):
    """Base class for every error raised by the analysis services"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.field = field

    def __str__(self) -> str:
        if self.field:
            return f"{self.field}: {self.message}"
        return self.message


class GraphParseError(KMSGraphError, ValueError):
    """Malformed graph input"""


class DuplicateLabelError(GraphParseError):
    pass


class NegativeCountError(GraphParseError):
    pass


class NonSquareMatrixError(GraphParseError):
    pass


class UnknownVertexError(GraphParseError):
    pass


class BetaParseError(GraphParseError):
    """An inverse temperature that is neither a real nor `log:<x>`"""


class QueryParseError(GraphParseError):
    """Malformed state-evaluation query (unknown edge, bad trace, ...)"""


class PreconditionError(KMSGraphError):
    pass


class ConvergenceError(KMSGraphError):
    def __init__(self, message: str, last_iterate: Any = None, field: Optional[str] = None):
        super().__init__(message, field)
        self.last_iterate = last_iterate


class ConsistencyError(KMSGraphError):
    pass


class DimensionCapError(KMSGraphError):
    pass
