"""Small hand-built graphs and independent oracles shared by the tests."""
from __future__ import annotations

import math

from urbanroute.graph import EdgeRecord, NodeRecord, RoadGraph


def make_graph(nodes, edges, k_max=8) -> RoadGraph:
    """``nodes``: (id, lat, lon); ``edges``: (id, from, to, length_m, speed_mps)."""
    return RoadGraph([NodeRecord(*n) for n in nodes], [EdgeRecord(*e) for e in edges], k_max=k_max)


def haversine_oracle(lat1, lon1, lat2, lon2, r=6_371_000.0):
    """atan2 form, written independently of the library's version."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.atan2(math.sqrt(a), math.sqrt(1 - a))


def brute_force_cost(g: RoadGraph, s: int, t: int, weights=None):
    """Cheapest simple s-t path by exhaustive DFS, or inf."""
    w = weights or {e.id: e.free_flow_time_s for e in g.edges.values()}
    best = math.inf

    def dfs(n, seen, acc):
        nonlocal best
        if n == t:
            best = min(best, acc)
            return
        for eid in g.adjacency[n]:
            e = g.edges[eid]
            if e.to not in seen:
                seen.add(e.to)
                dfs(e.to, seen, acc + w[eid])
                seen.discard(e.to)

    dfs(s, {s}, 0.0)
    return best


def line_graph(times=(1.0, 2.0)):
    """0 -> 1 -> 2 ... along an east-west line, one edge per entry of ``times``."""
    nodes = [(i, 52.5, 13.4 + 0.001 * i) for i in range(len(times) + 1)]
    edges = []
    for i, tt in enumerate(times):
        length = haversine_oracle(*nodes[i][1:], *nodes[i + 1][1:]) * 1.5
        edges.append((i, i, i + 1, length, length / tt))
    return make_graph(nodes, edges)


def branch_graph(lead_m=700.0, speed=10.0, goal_out_edge=False):
    """Shared lead-in 0->1, two mirrored corridors 1->2->3->6 and 1->4->5->6, then 6->7.

    Corridor A (nodes 2, 3) has lower ids than corridor B (nodes 4, 5).
    Both corridors have identical lengths, so ties go to corridor A.
    """
    d = 0.004
    pos = {
        0: (52.5, 13.390), 1: (52.5, 13.400),
        2: (52.5 + d, 13.405), 3: (52.5 + d, 13.410),
        4: (52.5 - d, 13.405), 5: (52.5 - d, 13.410),
        6: (52.5, 13.415), 7: (52.5, 13.425),
    }
    pairs = [(0, 1), (1, 2), (2, 3), (3, 6), (1, 4), (4, 5), (5, 6), (6, 7)]
    if goal_out_edge:
        pairs.append((7, 6))
    nodes = [(n, *pos[n]) for n in sorted(pos)]
    mirror = {2: 4, 3: 5, 4: 2, 5: 3}
    edges = []
    for i, (a, b) in enumerate(pairs):
        # both corridors get the same whole-metre lengths, rounded up to stay admissible
        ma, mb = mirror.get(a, a), mirror.get(b, b)
        length = math.ceil(max(haversine_oracle(*pos[a], *pos[b]), haversine_oracle(*pos[ma], *pos[mb])))
        if (a, b) == (0, 1):
            length = max(length, lead_m)
        edges.append((i, a, b, float(length), speed))
    return make_graph(nodes, edges)


CORRIDOR_A_EDGES = (1, 2, 3)
CORRIDOR_B_EDGES = (4, 5, 6)
