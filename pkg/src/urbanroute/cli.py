"""``urbanroute`` command line: generate, train, route, benchmark.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import CLASSICAL, default_jobs, emit_report, run_benchmark
from .context import (
    PenaltyConstants,
    generate_scenario,
    load_scenario,
    save_scenario,
    snapshot_at,
    validate_scenario_for_graph,
)
from .errors import RoutingError
from .graph import generate_grid_graph, load_graph, save_graph
from .neural import MODEL_KINDS, TrainConfig, load_model, save_model
from .planners import FREE_FLOW, a_star, dijkstra, heuristic_a_star
from .policy import (
    FeatureNormalizer,
    RolloutGuard,
    generate_training_set,
    model_normalizer,
    rollout,
    save_dataset,
    train_policy,
)

log = logging.getLogger("urbanroute")


def _resolve(args, path) -> Path:
    p = Path(path)
    if args.out_dir and not p.is_absolute():
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load_inputs(args):
    g = load_graph(args.graph)
    cfg = load_scenario(args.scenario)
    validate_scenario_for_graph(cfg, g)
    return g, cfg


def cmd_gen_graph(args) -> int:
    g = generate_grid_graph(args.rows, args.cols, args.spacing_m,
                            (args.origin_lat, args.origin_lon), args.speed_mps)
    out = _resolve(args, args.out)
    save_graph(g, out)
    print(json.dumps({"out": str(out), "nodes": g.num_nodes, "edges": g.num_edges}))
    return 0


def cmd_gen_scenario(args) -> int:
    g = load_graph(args.graph)
    cfg = generate_scenario(g, args.duration_s, args.congestion, args.weather, args.seed,
                            (args.zone_rows, args.zone_cols))
    out = _resolve(args, args.out)
    save_scenario(cfg, out)
    print(json.dumps({"out": str(out), "congestion_events": len(cfg.congestion_events),
                      "weather_events": len(cfg.weather_events)}))
    return 0


def _train(g, cfg, kind, queries, epochs, seed, lr, hidden, window, batch_size):
    norm = FeatureNormalizer.for_graph(g)
    ds = generate_training_set(g, cfg, queries, seed, norm=norm)
    if len(ds) == 0:
        raise RoutingError("no solvable training queries")
    tcfg = TrainConfig(learning_rate=lr, epochs=epochs, batch_size=batch_size, seed=seed)
    model, losses = train_policy(kind, ds, tcfg, norm, hidden=hidden, window=window)
    log.info("%s: %d examples (%d queries skipped), loss %.6f -> %.6f",
             kind, len(ds), ds.n_skipped, losses[0], losses[-1])
    return model, losses, ds


def cmd_train(args) -> int:
    g, cfg = _load_inputs(args)
    model, losses, ds = _train(g, cfg, args.model, args.queries, args.epochs, args.seed,
                               args.lr, args.hidden, args.window, args.batch_size)
    for epoch, loss in enumerate(losses):
        log.info("epoch %d loss %.6f", epoch, loss)
    out = _resolve(args, args.out)
    save_model(model, out)
    if args.dataset_out:
        save_dataset(ds, _resolve(args, args.dataset_out))
    print(json.dumps({"out": str(out), "model": args.model, "examples": len(ds),
                      "initial_loss": losses[0], "final_loss": losses[-1]}))
    return 0


def cmd_route(args) -> int:
    g, cfg = _load_inputs(args)
    k = PenaltyConstants(args.kt, args.kw)
    if args.algo == "policy":
        if not args.model:
            raise RoutingError("--algo policy needs --model")
        model = load_model(args.model)
        r = rollout(model, g, cfg, RolloutGuard(), args.from_node, args.to_node, args.depart_s,
                    model_normalizer(model, g))
        result = {"algo": "policy", "model_kind": model.kind, "reachable": r.completed,
                  "used_fallback": r.used_fallback, "realized_time_s": r.realized_time_s}
        if r.path is not None:
            result.update(nodes=list(r.path.node_seq), edges=list(r.path.edge_seq),
                          planned_cost_s=r.path.planned_cost_s)
    else:
        g.index_of(args.from_node)
        g.index_of(args.to_node)
        if args.algo == "dijkstra":
            path = dijkstra(g, FREE_FLOW, args.from_node, args.to_node)
        elif args.algo == "astar":
            path = a_star(g, FREE_FLOW, args.from_node, args.to_node)
        else:
            snap = snapshot_at(cfg, g, args.depart_s)
            path = heuristic_a_star(g, FREE_FLOW, snap, k, args.from_node, args.to_node)
        result = {"algo": args.algo, "reachable": path is not None}
        if path is not None:
            result.update(nodes=list(path.node_seq), edges=list(path.edge_seq),
                          planned_cost_s=path.planned_cost_s, expanded=path.expanded)
    print(json.dumps(result))
    return 0


def _split(csv_arg: str) -> list[str]:
    return [x.strip() for x in (csv_arg or "").split(",") if x.strip()]


def cmd_bench(args) -> int:
    g, cfg = _load_inputs(args)
    algos = _split(args.algos)
    for a in algos:
        if a not in CLASSICAL:
            raise RoutingError(f"unknown algorithm {a!r}; expected one of {', '.join(CLASSICAL)}")
    models = {}
    for i, entry in enumerate(_split(args.models)):
        if entry in MODEL_KINDS:
            model, _, _ = _train(g, cfg, entry, args.train_queries, args.epochs, args.seed + 1,
                                 args.lr, None, args.window, args.batch_size)
        else:
            model = load_model(entry)
        name = model.kind if model.kind not in models else f"{model.kind}-{i}"
        models[name] = model
    if not algos and not models:
        raise RoutingError("nothing to benchmark: give --algos and/or --models")
    report = run_benchmark(g, cfg, algos + list(models), args.queries, args.seed, models,
                           PenaltyConstants(args.kt, args.kw), args.replan_interval_s,
                           jobs=args.jobs if args.jobs else default_jobs())
    out_dir = Path(args.out_dir or ".")
    paths = emit_report(report, out_dir)
    for row in report.rows:
        log.info("%-16s %10s s %8s %%", row.algorithm,
                 "-" if row.mean_time_s is None else f"{row.mean_time_s:.2f}",
                 "-" if row.improvement_pct is None else f"{row.improvement_pct:.2f}")
    print(json.dumps({"out_dir": str(out_dir), "files": [p.name for p in paths],
                      "baseline": report.baseline, "digest": report.digest}))
    return 0


def _setup_logging(quiet: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    log.propagate = False


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default=None)
    common.add_argument("--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="urbanroute", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-graph", parents=[common], help="write a grid road graph")
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--cols", type=int, required=True)
    s.add_argument("--spacing-m", type=float, default=100.0)
    s.add_argument("--speed-mps", type=float, default=13.9)
    s.add_argument("--origin-lat", type=float, default=52.52)
    s.add_argument("--origin-lon", type=float, default=13.405)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("gen-scenario", parents=[common], help="write a random scenario")
    s.add_argument("--graph", required=True)
    s.add_argument("--duration-s", type=float, default=3600.0)
    s.add_argument("--congestion", type=int, default=5)
    s.add_argument("--weather", type=int, default=2)
    s.add_argument("--zone-rows", type=int, default=3)
    s.add_argument("--zone-cols", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_scenario)

    def training_flags(s):
        s.add_argument("--epochs", type=int, default=30)
        s.add_argument("--lr", type=float, default=1e-3)
        s.add_argument("--batch-size", type=int, default=32)
        s.add_argument("--window", type=int, default=4)

    s = sub.add_parser("train", parents=[common], help="train a next-edge model")
    s.add_argument("--graph", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--model", required=True, choices=MODEL_KINDS)
    s.add_argument("--queries", type=int, default=500)
    s.add_argument("--hidden", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--dataset-out", default=None)
    training_flags(s)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("route", parents=[common], help="plan one route")
    s.add_argument("--graph", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--algo", required=True, choices=("dijkstra", "astar", "heuristic-astar", "policy"))
    s.add_argument("--model", default=None)
    s.add_argument("--kt", type=float, default=600.0)
    s.add_argument("--kw", type=float, default=300.0)
    s.add_argument("--from", dest="from_node", type=int, required=True)
    s.add_argument("--to", dest="to_node", type=int, required=True)
    s.add_argument("--depart-s", type=float, default=0.0)
    s.set_defaults(func=cmd_route)

    s = sub.add_parser("bench", parents=[common], help="run the comparison benchmark")
    s.add_argument("--graph", required=True)
    s.add_argument("--scenario", required=True)
    s.add_argument("--algos", default=",".join(CLASSICAL))
    s.add_argument("--models", default="",
                   help="comma list of model kinds (trained in-process) or weight files")
    s.add_argument("--queries", type=int, default=200)
    s.add_argument("--train-queries", type=int, default=200)
    s.add_argument("--replan-interval-s", type=float, default=60.0)
    s.add_argument("--kt", type=float, default=600.0)
    s.add_argument("--kw", type=float, default=300.0)
    s.add_argument("--jobs", type=int, default=None)
    training_flags(s)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.quiet)
    try:
        return args.func(args)
    except (RoutingError, ValueError, OSError) as exc:
        print(f"urbanroute: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
