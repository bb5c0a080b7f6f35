"""Exception types shared across the package.

Everything raised for bad input derives from :class:`RoutingError` so the
CLI can map it to exit code 1 in one place.
"""


class RoutingError(Exception):
    """Base class for domain errors."""


class FormatError(RoutingError, ValueError):
    """A file could not be parsed, or carries an unsupported format_version."""


class GraphValidationError(RoutingError, ValueError):
    """A road graph violates one of its invariants."""


class UnknownNodeError(RoutingError, LookupError):
    def __init__(self, node_id):
        super().__init__(f"unknown node id {node_id!r}")
        self.node_id = node_id

    def __str__(self):
        return self.args[0]


class ScenarioError(RoutingError, ValueError):
    """Invalid scenario configuration or query time."""


class ShapeError(RoutingError, ValueError):
    """Tensor shapes do not conform."""
