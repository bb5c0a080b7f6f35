"""Compare the compiled and pure-Python search kernels on a large grid.

    python3 benchmarks/bench_search.py --rows 150 --cols 150 --queries 50
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from urbanroute import _kernel
from urbanroute.graph import generate_grid_graph
from urbanroute.planners import distance_heuristic


def time_backend(fn, g, pairs, heuristics, repeat):
    runs = []
    results = []
    for _ in range(repeat):
        start = time.perf_counter()
        results = []
        for (s, t), h in zip(pairs, heuristics):
            _, cost, expanded, _ = fn(g.indptr, g.edge_to, g.free_flow_time, h, s, t)
            results.append((cost, int(expanded)))
        runs.append(time.perf_counter() - start)
    return min(runs), statistics.median(runs), results


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=150)
    p.add_argument("--cols", type=int, default=150)
    p.add_argument("--queries", type=int, default=50)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    g = generate_grid_graph(args.rows, args.cols)
    rng = np.random.default_rng(args.seed)
    pairs = [tuple(int(x) for x in rng.integers(g.num_nodes, size=2)) for _ in range(args.queries)]
    backends = _kernel.backends()
    print(f"grid {args.rows}x{args.cols}: {g.num_nodes} nodes, {g.num_edges} edges, "
          f"{args.queries} queries, best of {args.repeat}")
    print(f"default backend: {_kernel.BACKEND}")

    for label, with_h in (("dijkstra", False), ("a_star", True)):
        hs = [distance_heuristic(g, int(g.node_ids[t])) if with_h else None for _, t in pairs]
        timings = {}
        answers = {}
        for name, fn in sorted(backends.items()):
            best, median, res = time_backend(fn, g, pairs, hs, args.repeat)
            timings[name] = best
            answers[name] = res
            print(f"  {label:9s} {name:7s} best {best:8.3f}s  median {median:8.3f}s  "
                  f"{1e3 * best / len(pairs):7.2f} ms/query")
        if len(answers) > 1:
            same = len({tuple(v) for v in answers.values()}) == 1
            print(f"  {label:9s} speedup {timings['python'] / timings['cython']:.1f}x, identical results: {same}")
    if "cython" not in backends:
        print("compiled kernel not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
