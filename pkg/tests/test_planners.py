import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import CORRIDOR_A_EDGES, CORRIDOR_B_EDGES, branch_graph, brute_force_cost, line_graph
from urbanroute.context import (
    CongestionEvent,
    ContextSnapshot,
    PenaltyConstants,
    ScenarioConfig,
    generate_scenario,
    snapshot_at,
)
from urbanroute.errors import UnknownNodeError
from urbanroute.graph import generate_grid_graph, generate_random_graph, path_is_connected
from urbanroute.planners import (
    CONTEXT,
    FREE_FLOW,
    CostModel,
    a_star,
    dijkstra,
    heuristic_a_star,
    plan_with,
    replan_route,
    settled_order,
)

ZERO_K = PenaltyConstants(0.0, 0.0)


def test_trivial_query():
    g = line_graph()
    for fn in (dijkstra, a_star):
        p = fn(g, FREE_FLOW, 1, 1)
        assert p.edge_seq == () and p.planned_cost_s == 0.0 and p.node_seq == (1,)


def test_line_graph_cost():
    g = line_graph((1.0, 2.0))
    p = dijkstra(g, FREE_FLOW, 0, 2)
    assert p.node_seq == (0, 1, 2)
    assert p.planned_cost_s == pytest.approx(3.0)
    assert a_star(g, FREE_FLOW, 0, 2).planned_cost_s == pytest.approx(3.0)


def test_unreachable_and_unknown():
    g = line_graph()
    assert dijkstra(g, FREE_FLOW, 2, 0) is None
    assert a_star(g, FREE_FLOW, 2, 0) is None
    with pytest.raises(UnknownNodeError):
        dijkstra(g, FREE_FLOW, 0, 42)


@given(st.integers(0, 100_000), st.integers(3, 10))
@settings(max_examples=60, deadline=None)
def test_dijkstra_matches_brute_force(seed, n):
    g = generate_random_graph(n, 3 * n, seed=seed)
    for s in g.nodes:
        for t in g.nodes:
            p = dijkstra(g, FREE_FLOW, s, t)
            best = brute_force_cost(g, s, t)
            if math.isinf(best):
                assert p is None
            else:
                assert p.planned_cost_s == pytest.approx(best, abs=1e-9)
                assert path_is_connected(g, p.node_seq, p.edge_seq)


@given(st.integers(0, 100_000))
@settings(max_examples=40, deadline=None)
def test_a_star_optimal(seed):
    g = generate_random_graph(80, 300, seed=seed)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        s, t = (int(x) for x in rng.choice(list(g.nodes), 2))
        d, a = dijkstra(g, FREE_FLOW, s, t), a_star(g, FREE_FLOW, s, t)
        assert (d is None) == (a is None)
        if d is not None:
            assert abs(d.planned_cost_s - a.planned_cost_s) <= 1e-9
            assert a.expanded <= d.expanded


def test_zero_heuristic_reproduces_dijkstra_order():
    g = generate_random_graph(60, 220, seed=2)
    h0 = np.zeros(g.num_nodes)
    for s, t in [(0, 59), (10, 3), (44, 17)]:
        assert settled_order(g, FREE_FLOW, s, t) == settled_order(g, FREE_FLOW, s, t, h=h0)
        assert a_star(g, FREE_FLOW, s, t, v_max=math.inf) == dijkstra(g, FREE_FLOW, s, t)


@given(st.integers(0, 100_000), st.floats(0.0, 3600.0))
@settings(max_examples=40, deadline=None)
def test_zero_penalties_reduce_to_a_star(seed, t):
    g = generate_grid_graph(6, 6)
    cfg = generate_scenario(g, 3600.0, seed=seed)
    snap = snapshot_at(cfg, g, t)
    rng = np.random.default_rng(seed)
    s, goal = (int(x) for x in rng.choice(36, 2, replace=False))
    assert heuristic_a_star(g, FREE_FLOW, snap, ZERO_K, s, goal).node_seq == a_star(g, FREE_FLOW, s, goal).node_seq


@given(st.integers(0, 100_000), st.floats(0.0, 3600.0))
@settings(max_examples=40, deadline=None)
def test_penalised_search_never_beats_optimum(seed, t):
    g = generate_grid_graph(6, 6, spacing_m=400.0)
    cfg = generate_scenario(g, 3600.0, seed=seed)
    snap = snapshot_at(cfg, g, t)
    rng = np.random.default_rng(seed)
    s, goal = (int(x) for x in rng.choice(36, 2, replace=False))
    h = heuristic_a_star(g, FREE_FLOW, snap, PenaltyConstants(), s, goal)
    assert h.planned_cost_s >= a_star(g, FREE_FLOW, s, goal).planned_cost_s - 1e-9


def _congest(g, edges, goal_edges=()):
    return ContextSnapshot.from_mappings(g, densities={e: 1.0 for e in (*edges, *goal_edges)})


def test_twin_corridor_avoids_congestion():
    g = branch_graph()
    base = a_star(g, FREE_FLOW, 0, 7)
    assert base.node_seq == (0, 1, 2, 3, 6, 7)
    # density on corridor A's out-edges marks nodes 2 and 3 as congested
    snap = _congest(g, CORRIDOR_A_EDGES[1:])
    p = heuristic_a_star(g, FREE_FLOW, snap, PenaltyConstants(600.0, 0.0), 0, 7)
    assert p.node_seq == (0, 1, 4, 5, 6, 7)
    # the chosen route is what exhaustive enumeration picks once congested nodes cost extra
    w = {e.id: e.free_flow_time_s + (600.0 if e.to in (2, 3) else 0.0) for e in g.edges.values()}
    assert sum(w[e] for e in p.edge_seq) == pytest.approx(brute_force_cost(g, 0, 7, w))
    # planned cost stays the unpenalised free-flow sum
    assert p.planned_cost_s == pytest.approx(sum(g.edges[e].free_flow_time_s for e in p.edge_seq))
    assert heuristic_a_star(g, FREE_FLOW, snap, ZERO_K, 0, 7).node_seq == base.node_seq


def test_goal_only_penalty_keeps_a_star_path():
    g = branch_graph(goal_out_edge=True)
    snap = ContextSnapshot.from_mappings(g, densities={8: 1.0})
    p = heuristic_a_star(g, FREE_FLOW, snap, PenaltyConstants(600.0, 300.0), 0, 7)
    assert p.node_seq == a_star(g, FREE_FLOW, 0, 7).node_seq


def test_context_costs_route_around_jam():
    g = branch_graph()
    snap = _congest(g, CORRIDOR_A_EDGES)
    p = dijkstra(g, CostModel(CONTEXT, snap), 0, 7)
    assert set(CORRIDOR_B_EDGES) <= set(p.edge_seq)
    with pytest.raises(ValueError):
        CostModel(CONTEXT)


def test_plan_with_dispatch():
    g = branch_graph()
    snap = ContextSnapshot.from_mappings(g)
    assert plan_with("a_star", g, snap, ZERO_K, 0, 7) == a_star(g, FREE_FLOW, 0, 7)
    with pytest.raises(ValueError):
        plan_with("bfs", g, snap, ZERO_K, 0, 7)


def test_static_scenario_single_distinct_plan():
    g = generate_grid_graph(5, 5)
    out = replan_route(g, ScenarioConfig(duration_s=600.0), PenaltyConstants(), "heuristic_a_star",
                       0, 24, replan_interval_s=10.0)
    assert out.completed
    assert len(out.history) > 1
    # each replan is the remaining suffix of the first plan
    first = out.plans[0]
    for when, p in out.history:
        assert first.node_seq[-len(p.node_seq):] == p.node_seq


def test_long_interval_single_plan():
    g = generate_grid_graph(5, 5)
    cfg = generate_scenario(g, 600.0, seed=1)
    out = replan_route(g, cfg, PenaltyConstants(), "heuristic_a_star", 0, 24, replan_interval_s=1e6)
    assert len(out.history) == 1
    assert [e for _, e, _ in out.trace] == list(out.plans[0].edge_seq)


def test_replan_switches_corridor_after_event():
    g = branch_graph()
    # corridor A turns congested from t=40 s; the agent reaches node 1 at t=70 s
    cfg = ScenarioConfig(duration_s=1000.0, zone_grid=(1, 1),
                         congestion_events=(CongestionEvent(3, 600.0, 1.0, 40.0, 140.0),))
    out = replan_route(g, cfg, PenaltyConstants(), "heuristic_a_star", 0, 7, replan_interval_s=60.0)
    assert out.plans[0].node_seq == (0, 1, 2, 3, 6, 7)
    later = [(t, p) for t, p in out.history if t >= 40.0]
    assert later and later[0][1].node_seq[:2] == (1, 4)
    driven = [e for _, e, _ in out.trace]
    assert set(CORRIDOR_B_EDGES) <= set(driven)


def test_replan_same_node():
    g = line_graph()
    out = replan_route(g, ScenarioConfig(duration_s=10.0), ZERO_K, "a_star", 1, 1)
    assert out.completed and out.trace == [] and out.plans[0].planned_cost_s == 0.0
    with pytest.raises(ValueError):
        replan_route(g, ScenarioConfig(duration_s=10.0), ZERO_K, "a_star", 0, 2, replan_interval_s=0.0)


def test_replan_unreachable():
    g = line_graph()
    out = replan_route(g, ScenarioConfig(duration_s=10.0), ZERO_K, "a_star", 2, 0)
    assert not out.completed
