"""Context-aware urban routing: graphs, scenarios, planners and learned policies."""
from ._kernel import BACKEND
from .context import (
    PenaltyConstants,
    ScenarioConfig,
    generate_scenario,
    load_scenario,
    snapshot_at,
)
from .errors import (
    FormatError,
    GraphValidationError,
    RoutingError,
    ScenarioError,
    ShapeError,
    UnknownNodeError,
)
from .graph import RoadGraph, generate_grid_graph, great_circle_distance, load_graph
from .planners import FREE_FLOW, CostModel, a_star, dijkstra, heuristic_a_star, replan_route

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CostModel", "FREE_FLOW", "FormatError", "GraphValidationError",
    "PenaltyConstants", "RoadGraph", "RoutingError", "ScenarioConfig", "ScenarioError",
    "ShapeError", "UnknownNodeError", "a_star", "dijkstra", "generate_grid_graph",
    "generate_scenario", "great_circle_distance", "heuristic_a_star", "load_graph",
    "load_scenario", "replan_route", "snapshot_at",
]
