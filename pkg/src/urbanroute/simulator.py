"""Realized travel times under a time-varying scenario.

Every strategy is scored the same way: each edge's traversal time is
fixed from the context at the moment the agent enters it. Past the end
of the scenario the final (event-free) state is held.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .context import PenaltyConstants, ScenarioConfig, edge_travel_time, snapshot_clamped
from .graph import RoadGraph
from .neural import NextEdgeModel
from .planners import PathResult, replan_route
from .policy import FeatureNormalizer, RolloutGuard, rollout


@dataclass
class SimResult:
    realized_time_s: float
    trace: list[tuple[float, int, float]] = field(default_factory=list)
    completed: bool = True
    strategy: str = ""
    used_fallback: bool = False


def _total(trace) -> float:
    total = 0.0
    for _, _, dt in trace:
        total += dt
    return total


def simulate_plan(g: RoadGraph, cfg: ScenarioConfig, path: PathResult,
                  depart_s: float = 0.0, strategy: str = "plan") -> SimResult:
    """Drive a fixed plan with edge-entry time stepping."""
    now = float(depart_s)
    trace = []
    for eid in path.edge_seq:
        dt = edge_travel_time(g.edges[eid], snapshot_clamped(cfg, g, now))
        trace.append((now, eid, dt))
        now += dt
    return SimResult(_total(trace), trace, True, strategy)


def simulate_replanned(g: RoadGraph, cfg: ScenarioConfig, k: PenaltyConstants, planner: str,
                       s: int, t: int, depart_s: float = 0.0, interval_s: float = 60.0,
                       strategy: Optional[str] = None) -> SimResult:
    out = replan_route(g, cfg, k, planner, s, t, interval_s, depart_s)
    return SimResult(_total(out.trace), out.trace, out.completed,
                     strategy or f"{planner}+replan")


def simulate_policy(model: NextEdgeModel, g: RoadGraph, cfg: ScenarioConfig,
                    guard: RolloutGuard, s: int, t: int, depart_s: float = 0.0,
                    norm: Optional[FeatureNormalizer] = None,
                    strategy: Optional[str] = None) -> SimResult:
    r = rollout(model, g, cfg, guard, s, t, depart_s, norm)
    return SimResult(_total(r.trace), r.trace, r.completed, strategy or model.kind,
                     r.used_fallback)


def trace_is_walk(g: RoadGraph, trace) -> bool:
    for (_, a, _), (_, b, _) in zip(trace, trace[1:]):
        if g.edges[a].to != g.edges[b].from_:
            return False
    return True


TRACE_HEADER = ("query_id", "strategy", "t_enter", "edge_id", "traversal_s")


def write_trace_csv(path, rows: Iterable[tuple[int, SimResult]]) -> None:
    """One row per traversed edge for each ``(query_id, result)`` pair."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for qid, res in rows:
            for t_enter, eid, dt in res.trace:
                w.writerow([qid, res.strategy, repr(float(t_enter)), eid, repr(float(dt))])
