from typing import Any, Optional


class WearableGraphError(Exception):
    """Base class for every error raised by the wearable graph engine."""
    pass


class ArgumentError(WearableGraphError, ValueError):
    """Raised when an operation receives an argument outside its domain."""
    pass


class GraphInvariantError(WearableGraphError):
    """Raised when a graph value violates one of its structural invariants."""
    pass


class NodeNotFoundError(WearableGraphError, KeyError):
    """Raised when a node id is not present in the graph."""

    def __init__(self, node_id: str):
        self.node_id = node_id
        super().__init__(f"Node not found: {node_id}")

    def __str__(self):
        return f"Node not found: {self.node_id}"


class DuplicateMetricError(ArgumentError):
    """Raised when metric names collide after normalization."""

    def __init__(self, duplicates: list[str]):
        self.duplicates = duplicates
        super().__init__(f"Duplicate metric names after normalization: {', '.join(duplicates)}")


class GraphSchemaError(WearableGraphError):
    """Raised when a graph document is malformed. `path` points at the offending element."""

    def __init__(self, message: str, path: str = "$"):
        self.path = path
        super().__init__(f"{message} (at {path})")


class SchemaVersionError(GraphSchemaError):
    """Raised when a graph document was written with an incompatible schema version."""

    def __init__(self, found: Any, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"Incompatible schema_version {found!r}; expected {expected}", path="$.schema_version")


class DataFormatError(ArgumentError):
    """Raised for malformed subject CSV input."""

    def __init__(self, message: str, row: Optional[int] = None, day: Optional[str] = None):
        self.row = row
        self.day = day
        super().__init__(message)


class ProviderError(WearableGraphError):
    """Raised when a provider call fails; carries what was being processed."""

    def __init__(self, message: str, subject: Any = None):
        self.subject = subject
        super().__init__(message)


class InsufficientDataError(WearableGraphError):
    """Raised when there is not enough valid evidence to compute a result."""
    pass


class CalibrationError(WearableGraphError):
    """Raised when the alpha calibration finds no curve intersection."""

    def __init__(self, message: str, curves: Any = None):
        self.curves = curves
        super().__init__(message)


class RankRecordError(ArgumentError):
    """Raised when a rank record is not a valid permutation."""

    def __init__(self, message: str, query_id: Optional[str] = None):
        self.query_id = query_id
        super().__init__(message)
