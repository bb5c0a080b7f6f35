"""Benchmark harness: paired queries, travel-time tables and metrics.

Every algorithm sees the same query set. The slowest algorithm with at
least one completed run is the baseline, and improvements are always
recomputed from the stored means.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .context import PenaltyConstants, ScenarioConfig, scenario_to_dict
from .errors import RoutingError
from .graph import RoadGraph
from .neural import NextEdgeModel
from .planners import FREE_FLOW, a_star, dijkstra
from .policy import (
    Dataset,
    FeatureNormalizer,
    Query,
    RolloutGuard,
    model_normalizer,
    oracle_walk,
    predict_slots,
    sample_queries,
)
from .simulator import SimResult, simulate_plan, simulate_policy, simulate_replanned

CLASSICAL = ("dijkstra", "astar", "heuristic-astar")
REPORT_FORMAT_VERSION = 1


def improvement_percent(t_base: float, t: float) -> float:
    """Percent reduction of ``t`` relative to ``t_base``, rounded to 2 decimals."""
    if not t_base > 0:
        raise ValueError(f"baseline time must be positive, got {t_base}")
    return round(100.0 * (t_base - t) / t_base, 2)


def classification_metrics(preds: Sequence[int], labels: Sequence[int],
                           n_classes: Optional[int] = None) -> dict[str, float]:
    """Accuracy plus macro precision, recall and F1.

    Macro averages run over the classes present in ``labels``; any 0/0
    ratio counts as 0. Ratios are exact fractions until the final float.
    """
    preds = [int(p) for p in preds]
    labels = [int(y) for y in labels]
    if len(preds) != len(labels):
        raise ValueError(f"length mismatch: {len(preds)} predictions, {len(labels)} labels")
    if not labels:
        raise ValueError("need at least one example")
    classes = sorted(set(labels))
    if n_classes is not None and classes[-1] >= n_classes:
        raise ValueError(f"label {classes[-1]} outside {n_classes} classes")

    def ratio(a, b):
        return Fraction(a, b) if b else Fraction(0)

    correct = sum(p == y for p, y in zip(preds, labels))
    precision, recall, f1 = [], [], []
    for c in classes:
        tp = sum(p == c and y == c for p, y in zip(preds, labels))
        pp = sum(p == c for p in preds)
        ap = sum(y == c for y in labels)
        pr, rc = ratio(tp, pp), ratio(tp, ap)
        precision.append(pr)
        recall.append(rc)
        f1.append(2 * pr * rc / (pr + rc) if pr + rc else Fraction(0))
    k = len(classes)
    return {
        "accuracy": float(Fraction(correct, len(labels))),
        "precision": float(sum(precision) / k),
        "recall": float(sum(recall) / k),
        "f1": float(sum(f1) / k),
    }


@dataclass
class BenchRow:
    algorithm: str
    mean_time_s: Optional[float]
    improvement_pct: Optional[float]
    completed_fraction: float
    flagged: bool = False


@dataclass
class BenchReport:
    rows: list[BenchRow]
    metrics: dict[str, dict[str, float]] = field(default_factory=dict)
    digest: str = ""
    per_query: list[tuple[int, str, float, bool]] = field(default_factory=list)
    baseline: Optional[str] = None

    @classmethod
    def from_means(cls, means: Mapping[str, Optional[float]],
                   completed: Optional[Mapping[str, float]] = None, **kw) -> "BenchReport":
        """Assemble rows from per-algorithm means (None = no completed runs)."""
        completed = completed or {}
        usable = {a: m for a, m in means.items() if m is not None}
        if not usable:
            raise RoutingError("no algorithm completed any run")
        baseline = max(sorted(usable), key=lambda a: usable[a])
        t_base = usable[baseline]
        rows = []
        for a, m in means.items():
            if m is None:
                rows.append(BenchRow(a, None, None, completed.get(a, 0.0), flagged=True))
            else:
                rows.append(BenchRow(a, m, improvement_percent(t_base, m), completed.get(a, 1.0)))
        rows.sort(key=lambda r: (r.improvement_pct is None, r.improvement_pct or 0.0, r.algorithm))
        return cls(rows, baseline=baseline, **kw)


# --- running -----------------------------------------------------------------

@dataclass
class BenchSetup:
    """Everything a worker needs to score one query."""

    g: RoadGraph
    cfg: ScenarioConfig
    algorithms: tuple[str, ...]
    models: dict[str, NextEdgeModel]
    k: PenaltyConstants
    replan_interval_s: float
    guard: RolloutGuard


def run_query(setup: BenchSetup, q: Query) -> dict[str, SimResult]:
    g, cfg = setup.g, setup.cfg
    out: dict[str, SimResult] = {}
    for algo in setup.algorithms:
        if algo in ("dijkstra", "astar"):
            plan = (dijkstra if algo == "dijkstra" else a_star)(g, FREE_FLOW, q.origin, q.destination)
            out[algo] = (SimResult(0.0, [], False, algo) if plan is None
                         else simulate_plan(g, cfg, plan, q.depart_s, algo))
        elif algo == "heuristic-astar":
            out[algo] = simulate_replanned(g, cfg, setup.k, "heuristic_a_star", q.origin,
                                           q.destination, q.depart_s, setup.replan_interval_s,
                                           strategy=algo)
        else:
            model = setup.models[algo]
            out[algo] = simulate_policy(model, g, cfg, setup.guard, q.origin, q.destination,
                                        q.depart_s, model_normalizer(model, g), strategy=algo)
    return out


def _run_chunk(args):
    setup, queries = args
    return [run_query(setup, q) for q in queries]


def config_digest(g: RoadGraph, cfg: ScenarioConfig, seed: int, algorithms: Sequence[str],
                  extra: Optional[dict] = None) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(g.to_dict(), sort_keys=True).encode())
    h.update(json.dumps(scenario_to_dict(cfg), sort_keys=True).encode())
    h.update(json.dumps({"seed": seed, "algorithms": sorted(algorithms), **(extra or {})},
                        sort_keys=True).encode())
    return h.hexdigest()


def evaluate_models(g: RoadGraph, cfg: ScenarioConfig, queries: Sequence[Query],
                    models: Mapping[str, NextEdgeModel]) -> dict[str, dict[str, float]]:
    """Next-edge metrics of each model against oracle labels on ``queries``."""
    if not models:
        return {}
    metrics = {}
    by_norm: dict[FeatureNormalizer, Dataset] = {}
    for name in sorted(models):
        model = models[name]
        norm = model_normalizer(model, g)
        if norm not in by_norm:
            ds = Dataset(k_max=norm.k_max)
            for q in queries:
                ds.examples.extend(oracle_walk(g, cfg, q, norm) or [])
            by_norm[norm] = ds
        ds = by_norm[norm]
        if len(ds) == 0:
            continue
        preds = predict_slots(model, ds.inputs_for(model), ds.masks())
        metrics[name] = classification_metrics(preds, ds.labels(), norm.k_max)
    return metrics


def run_benchmark(g: RoadGraph, cfg: ScenarioConfig, suites: Sequence[str], queries: int,
                  seed: int, models: Optional[Mapping[str, NextEdgeModel]] = None,
                  k: PenaltyConstants = PenaltyConstants(), replan_interval_s: float = 60.0,
                  guard: RolloutGuard = RolloutGuard(), jobs: int = 1,
                  depart_window: Optional[tuple[float, float]] = None) -> BenchReport:
    """Score every algorithm on the same seeded query set.

    ``suites`` names classical planners (``dijkstra``, ``astar``,
    ``heuristic-astar``) or keys of ``models``. Results do not depend on
    the order of ``suites`` or on ``jobs``.
    """
    models = dict(models or {})
    algorithms = tuple(sorted(set(suites)))
    if not algorithms:
        raise ValueError("need at least one algorithm")
    if queries < 1:
        raise ValueError("need at least one query")
    for a in algorithms:
        if a not in CLASSICAL and a not in models:
            raise ValueError(f"unknown algorithm {a!r} (no such planner or model)")
    window = depart_window if depart_window is not None else (0.0, cfg.duration_s)
    qs = sample_queries(g, queries, seed, window)
    setup = BenchSetup(g, cfg, algorithms, {a: models[a] for a in algorithms if a in models},
                       k, replan_interval_s, guard)

    jobs = max(1, int(jobs))
    if jobs == 1 or len(qs) < 2 * jobs:
        results = [run_query(setup, q) for q in qs]
    else:
        chunks = [qs[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_chunk, [(setup, c) for c in chunks]))
        by_qid = {}
        for chunk, part in zip(chunks, parts):
            for q, res in zip(chunk, part):
                by_qid[q.qid] = res
        results = [by_qid[q.qid] for q in qs]

    means: dict[str, Optional[float]] = {}
    completed: dict[str, float] = {}
    per_query = []
    for a in algorithms:
        times = []
        for q, res in zip(qs, results):
            r = res[a]
            per_query.append((q.qid, a, r.realized_time_s, r.completed))
            if r.completed:
                times.append(r.realized_time_s)
        completed[a] = len(times) / len(qs)
        means[a] = float(np.mean(times)) if times else None
    per_query.sort(key=lambda row: (row[0], row[1]))

    metric_models = {a: models[a] for a in algorithms if a in models}
    return BenchReport.from_means(
        means, completed,
        metrics=evaluate_models(g, cfg, qs, metric_models),
        digest=config_digest(g, cfg, seed, algorithms,
                             {"queries": queries, "k_t": k.k_t, "k_w": k.k_w,
                              "replan_interval_s": replan_interval_s}),
        per_query=per_query,
    )


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


# --- reports -----------------------------------------------------------------

def _fmt2(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.2f}"


def _fmt4(x: float) -> str:
    return f"{x:.4f}"


def emit_report(r: BenchReport, out_dir) -> list[Path]:
    """Write table1.csv, table2.csv, plotdata.csv, report.md and manifest.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []

        p = out / "table1.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["algorithm", "mean_time_s", "improvement_pct"])
            for row in r.rows:
                w.writerow([row.algorithm, _fmt2(row.mean_time_s), _fmt2(row.improvement_pct)])
        paths.append(p)

        p = out / "table2.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "accuracy", "precision", "f1"])
            for name in sorted(r.metrics):
                m = r.metrics[name]
                w.writerow([name, _fmt4(m["accuracy"]), _fmt4(m["precision"]), _fmt4(m["f1"])])
        paths.append(p)

        p = out / "plotdata.csv"
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["query_id", "algorithm", "realized_time_s", "completed"])
            for qid, algo, t, done in r.per_query:
                w.writerow([qid, algo, _fmt2(t), int(done)])
        paths.append(p)

        p = out / "report.md"
        p.write_text(render_markdown(r), encoding="utf-8")
        paths.append(p)

        p = out / "manifest.json"
        p.write_text(json.dumps({"format_version": REPORT_FORMAT_VERSION, "digest": r.digest,
                                 "baseline": r.baseline,
                                 "files": [x.name for x in paths]}, indent=1) + "\n",
                     encoding="utf-8")
        paths.append(p)
    except OSError as exc:
        raise RoutingError(f"cannot write report to {out}: {exc}") from exc
    return paths


def render_markdown(r: BenchReport) -> str:
    lines = ["# Routing benchmark", "",
             "## Comparative performance", "",
             "| Algorithm | Average Travel Time (s) | Improvement (%) |",
             "|---|---:|---:|"]
    for row in r.rows:
        flag = " (no completed runs)" if row.flagged else ""
        lines.append(f"| {row.algorithm}{flag} | {_fmt2(row.mean_time_s)} | {_fmt2(row.improvement_pct)} |")
    lines += ["", f"Baseline: {r.baseline}", ""]
    if r.metrics:
        lines += ["## Next-edge prediction metrics", "",
                  "| Model | Accuracy | Precision | F1 Score |", "|---|---:|---:|---:|"]
        for name in sorted(r.metrics):
            m = r.metrics[name]
            lines.append(f"| {name} | {_fmt4(m['accuracy'])} | {_fmt4(m['precision'])} | {_fmt4(m['f1'])} |")
        lines.append("")
    if r.digest:
        lines += [f"Config digest: `{r.digest}`", ""]
    return "\n".join(lines)
