"""Classical planners: Dijkstra, A*, penalty-guided A*, and replanning.

All three searches share one best-first kernel (compiled when
available). They differ only in the per-node heuristic array:

* dijkstra: none
* a_star: straight-line distance to the goal over the graph's top speed
* heuristic_a_star: the a_star term plus traffic and weather penalties

Penalties only steer the search; ``planned_cost_s`` is always the
unpenalised g-cost of the returned path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernel
from .context import (
    ContextSnapshot,
    PenaltyConstants,
    ScenarioConfig,
    edge_time_array,
    edge_travel_time,
    penalty_array,
    snapshot_clamped,
)
from .graph import RoadGraph

STATIC = "static_free_flow"
CONTEXT = "context_aware"


@dataclass(frozen=True)
class CostModel:
    mode: str = STATIC
    snapshot: Optional[ContextSnapshot] = None

    def __post_init__(self):
        if self.mode not in (STATIC, CONTEXT):
            raise ValueError(f"unknown cost mode {self.mode!r}")
        if self.mode == CONTEXT and self.snapshot is None:
            raise ValueError("context_aware costs need a snapshot")

    def edge_costs(self, g: RoadGraph) -> np.ndarray:
        if self.mode == STATIC:
            return g.free_flow_time
        return edge_time_array(self.snapshot, g)


FREE_FLOW = CostModel()


@dataclass(frozen=True)
class PathResult:
    node_seq: tuple[int, ...]
    edge_seq: tuple[int, ...]
    planned_cost_s: float
    expanded: int = 0

    @property
    def origin(self) -> int:
        return self.node_seq[0]

    @property
    def destination(self) -> int:
        return self.node_seq[-1]


def _search(g: RoadGraph, costs: np.ndarray, h: Optional[np.ndarray], s: int, t: int,
            record_order: bool = False):
    si, ti = g.index_of(s), g.index_of(t)
    pred, cost, expanded, order = _kernel.best_first(
        g.indptr, g.edge_to, costs, h, si, ti, record_order
    )
    if not math.isfinite(cost):
        return None, order
    edges: list[int] = []
    v = ti
    while v != si:
        k = int(pred[v])
        edges.append(k)
        v = int(g.edge_from[k])
    edges.reverse()
    node_seq = [s] + [int(g.node_ids[g.edge_to[k]]) for k in edges]
    edge_seq = tuple(int(g.edge_ids[k]) for k in edges)
    # summed in path order so the value is reproducible from edge_seq alone
    total = 0.0
    for k in edges:
        total += float(costs[k])
    return PathResult(tuple(node_seq), edge_seq, total, int(expanded)), order


def distance_heuristic(g: RoadGraph, t: int, v_max: float | None = None) -> np.ndarray:
    """Seconds-valued straight-line bound to ``t`` for every node index."""
    v = g.v_max if v_max is None else v_max
    if math.isinf(v):
        return np.zeros(g.num_nodes)
    return g.distances_to(t) / v


def dijkstra(g: RoadGraph, cost: CostModel, s: int, t: int) -> Optional[PathResult]:
    """Minimum-cost path, or None when ``t`` is unreachable from ``s``."""
    return _search(g, cost.edge_costs(g), None, s, t)[0]


def a_star(g: RoadGraph, cost: CostModel, s: int, t: int,
           v_max: float | None = None) -> Optional[PathResult]:
    """A* with the admissible distance heuristic.

    ``v_max=math.inf`` collapses the heuristic to zero (test hook).
    """
    return _search(g, cost.edge_costs(g), distance_heuristic(g, t, v_max), s, t)[0]


def heuristic_a_star(
    g: RoadGraph,
    cost: CostModel,
    snap: ContextSnapshot,
    k: PenaltyConstants,
    s: int,
    t: int,
) -> Optional[PathResult]:
    """A* whose heuristic adds the traffic and weather penalties of each node.

    The penalised heuristic is inadmissible by design, so the result is
    not guaranteed optimal under ``cost``.
    """
    h = distance_heuristic(g, t) + penalty_array(snap, g, k)
    return _search(g, cost.edge_costs(g), h, s, t)[0]


def settled_order(g: RoadGraph, cost: CostModel, s: int, t: int,
                  h: Optional[np.ndarray] = None) -> list[int]:
    """Node ids in the order the kernel settles them (diagnostics/tests)."""
    _, order = _search(g, cost.edge_costs(g), h, s, t, record_order=True)
    return [int(g.node_ids[i]) for i in order]


# --- replanning --------------------------------------------------------------

PLANNERS = ("a_star", "heuristic_a_star")


def plan_with(name: str, g: RoadGraph, snap: ContextSnapshot, k: PenaltyConstants,
              s: int, t: int) -> Optional[PathResult]:
    """Dispatch used by the replanning loop.

    ``a_star`` ignores the snapshot (free-flow costs); ``heuristic_a_star``
    keeps free-flow g-costs and reads the snapshot through its penalties.
    """
    if name == "a_star":
        return a_star(g, FREE_FLOW, s, t)
    if name == "heuristic_a_star":
        return heuristic_a_star(g, FREE_FLOW, snap, k, s, t)
    raise ValueError(f"unknown planner {name!r}; expected one of {PLANNERS}")


@dataclass
class ReplanOutcome:
    """Plan history plus the trajectory actually driven.

    ``trace`` holds ``(t_enter, edge_id, traversal_s)`` per edge.
    """

    history: list[tuple[float, PathResult]] = field(default_factory=list)
    trace: list[tuple[float, int, float]] = field(default_factory=list)
    completed: bool = True
    arrival_s: float = 0.0

    @property
    def plans(self) -> list[PathResult]:
        return [p for _, p in self.history]


def replan_route(
    g: RoadGraph,
    cfg: ScenarioConfig,
    k: PenaltyConstants,
    planner: str,
    s: int,
    t: int,
    replan_interval_s: float = 60.0,
    depart_s: float = 0.0,
    edge_time: Optional[Callable[[int, float], float]] = None,
) -> ReplanOutcome:
    """Drive from ``s`` to ``t``, replanning at interval boundaries.

    The agent plans at departure, then follows the plan edge by edge
    (traversal time fixed at edge entry). When it reaches a node at or
    after the next boundary it replans from that node using the context
    at the arrival time; it never switches mid-edge.
    """
    if not replan_interval_s > 0:
        raise ValueError("replan_interval_s must be positive")
    g.index_of(s)
    g.index_of(t)
    if edge_time is None:
        def edge_time(eid, when):
            return edge_travel_time(g.edges[eid], snapshot_clamped(cfg, g, when))

    out = ReplanOutcome()
    now = float(depart_s)
    node = s
    next_boundary = depart_s
    plan_edges: list[int] = []
    hops = 0
    max_hops = 20 * g.num_nodes + 20
    while node != t:
        if now >= next_boundary or not plan_edges:
            plan = plan_with(planner, g, snapshot_clamped(cfg, g, now), k, node, t)
            if plan is None:
                out.completed = False
                break
            out.history.append((now, plan))
            plan_edges = list(plan.edge_seq)
            while next_boundary <= now:
                next_boundary += replan_interval_s
        eid = plan_edges.pop(0)
        dt = edge_time(eid, now)
        out.trace.append((now, eid, dt))
        now += dt
        node = g.edges[eid].to
        hops += 1
        if hops > max_hops:
            out.completed = False
            break
    if s == t:
        out.history.append((now, PathResult((s,), (), 0.0, 0)))
    out.arrival_s = now
    return out
