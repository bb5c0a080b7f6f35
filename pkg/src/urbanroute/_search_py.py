"""Pure-Python best-first search kernel (fallback for ``_search_ext``).

Both backends implement the same contract; see :func:`best_first`.
"""
from __future__ import annotations

import heapq
import math


def best_first(indptr, heads, costs, h, source, target, record_order=False):
    """Label-setting search over a CSR graph.

    Heap keys are ``(g + h[v], v)`` so equal keys pop the lower node index
    first. A node is settled on its first pop and never reopened; edges
    are relaxed in CSR order and only strictly better labels replace an
    existing one. With ``h=None`` this is Dijkstra.

    Returns ``(pred_edge, cost, expanded, order)`` where ``pred_edge[v]``
    is the CSR position of the edge used to reach ``v`` (-1 if none),
    ``cost`` the g-label of ``target`` (inf if unreached), ``expanded``
    the number of settled nodes and ``order`` the settle sequence when
    ``record_order`` is set (else None).
    """
    n = len(indptr) - 1
    indptr = indptr.tolist() if hasattr(indptr, "tolist") else list(indptr)
    heads = heads.tolist() if hasattr(heads, "tolist") else list(heads)
    costs = costs.tolist() if hasattr(costs, "tolist") else list(costs)
    if h is not None:
        h = h.tolist() if hasattr(h, "tolist") else list(h)
    inf = math.inf
    dist = [inf] * n
    pred = [-1] * n
    closed = [False] * n
    order = [] if record_order else None
    dist[source] = 0.0
    heap = [(0.0 + (h[source] if h is not None else 0.0), source)]
    expanded = 0
    push, pop = heapq.heappush, heapq.heappop
    while heap:
        _, u = pop(heap)
        if closed[u]:
            continue
        closed[u] = True
        expanded += 1
        if order is not None:
            order.append(u)
        if u == target:
            break
        du = dist[u]
        for k in range(indptr[u], indptr[u + 1]):
            v = heads[k]
            if closed[v]:
                continue
            nd = du + costs[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = k
                push(heap, (nd + h[v] if h is not None else nd, v))
    return pred, dist[target], expanded, order
