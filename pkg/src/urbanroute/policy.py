"""Learned next-edge routing.

State encoding, oracle-labelled datasets, training glue and the rollout
loop that turns a next-edge classifier into a full route.

Feature layout (``6 + 5 * k_max`` entries, all in [-1, 1]):

    cur_lat, cur_lon, goal_lat, goal_lon   bbox-normalised to [0, 1]
    goal_dist                               great-circle / graph diameter
    weather                                 severity of the current zone
    per slot k: len, time, density, heading, valid
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .context import (
    ContextSnapshot,
    ScenarioConfig,
    edge_travel_time,
    snapshot_clamped,
)
from .errors import FormatError
from .graph import EdgeRecord, RoadGraph, great_circle_distance, haversine_array, out_edges
from .neural import NextEdgeModel, TrainConfig, build_model, fit
from .planners import CONTEXT, CostModel, PathResult, _search, distance_heuristic, dijkstra

DATASET_FORMAT_VERSION = 1
BASE_FEATURES = ("cur_lat", "cur_lon", "goal_lat", "goal_lon", "goal_dist", "weather")
SLOT_FEATURES = ("len", "time", "density", "heading", "valid")


def feature_names(k_max: int) -> list[str]:
    names = list(BASE_FEATURES)
    for k in range(k_max):
        names += [f"s{k}_{f}" for f in SLOT_FEATURES]
    return names


def n_features(k_max: int) -> int:
    return len(BASE_FEATURES) + len(SLOT_FEATURES) * k_max


def valid_slot_index(k_max: int) -> np.ndarray:
    return len(BASE_FEATURES) + len(SLOT_FEATURES) * np.arange(k_max) + 4


@dataclass(frozen=True)
class FeatureNormalizer:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float
    diameter_m: float
    max_length_m: float
    max_free_flow_s: float
    k_max: int

    @classmethod
    def for_graph(cls, g: RoadGraph) -> "FeatureNormalizer":
        lat_min, lat_max, lon_min, lon_max = g.bbox()
        diam = float(haversine_array(lat_min, lon_min, lat_max, lon_max))
        return cls(lat_min, lat_max, lon_min, lon_max, diam if diam > 0 else 1.0,
                   float(g.edge_length.max()) if g.num_edges else 1.0,
                   float(g.free_flow_time.max()) if g.num_edges else 1.0,
                   g.k_max)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureNormalizer":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def _scale(x, lo, hi):
    return (x - lo) / (hi - lo) if hi > lo else 0.0


def _plane(a_lat, a_lon, b_lat, b_lon):
    mean = math.radians(0.5 * (a_lat + b_lat))
    return (b_lon - a_lon) * math.cos(mean), b_lat - a_lat


def heading_alignment(g: RoadGraph, e: EdgeRecord, goal: int) -> float:
    """cos of the angle between the edge direction and the direction to ``goal``."""
    a = g.nodes[e.from_]
    b = g.nodes[e.to]
    c = g.nodes[goal]
    ex, ey = _plane(a.lat, a.lon, b.lat, b.lon)
    gx, gy = _plane(a.lat, a.lon, c.lat, c.lon)
    ne = math.hypot(ex, ey)
    ng = math.hypot(gx, gy)
    if ne == 0.0 or ng == 0.0:
        return 0.0
    return max(-1.0, min(1.0, (ex * gx + ey * gy) / (ne * ng)))


def encode_state(g: RoadGraph, n: int, goal: int, snap: ContextSnapshot,
                 norm: Optional[FeatureNormalizer] = None) -> np.ndarray:
    norm = norm or FeatureNormalizer.for_graph(g)
    cur = g.node(n)
    tgt = g.node(goal)
    x = np.zeros(n_features(norm.k_max))
    x[0] = _scale(cur.lat, norm.lat_min, norm.lat_max)
    x[1] = _scale(cur.lon, norm.lon_min, norm.lon_max)
    x[2] = _scale(tgt.lat, norm.lat_min, norm.lat_max)
    x[3] = _scale(tgt.lon, norm.lon_min, norm.lon_max)
    x[4] = great_circle_distance(cur, tgt) / norm.diameter_m
    x[5] = snap.severity[snap.layout.node_zone[g.index_of(n)]]
    base = len(BASE_FEATURES)
    for k, e in enumerate(out_edges(g, n)[: norm.k_max]):
        j = base + len(SLOT_FEATURES) * k
        x[j] = e.length_m / norm.max_length_m
        x[j + 1] = e.free_flow_time_s / norm.max_free_flow_s
        x[j + 2] = snap.edge_density(e.id)
        x[j + 3] = heading_alignment(g, e, goal)
        x[j + 4] = 1.0
    # a graph with longer edges than the one the normaliser saw still stays in range
    np.clip(x, -1.0, 1.0, out=x)
    return x


def stack_window(history: Sequence[np.ndarray], window: int) -> np.ndarray:
    """Last ``window`` vectors, zero-padded at the front."""
    d = len(history[-1])
    out = np.zeros((window, d))
    tail = list(history[-window:])
    out[window - len(tail):] = tail
    return out


# --- datasets ----------------------------------------------------------------

@dataclass(frozen=True)
class Query:
    qid: int
    origin: int
    destination: int
    depart_s: float


def sample_queries(g: RoadGraph, n: int, seed: int,
                   depart_window: tuple[float, float] = (0.0, 0.0)) -> list[Query]:
    """``n`` origin/destination/departure triples, one RNG substream per query."""
    ids = list(g.nodes)
    out = []
    for q in range(n):
        rng = np.random.default_rng([seed, q])
        s = ids[int(rng.integers(len(ids)))]
        t = ids[int(rng.integers(len(ids) - 1))]
        if t == s:
            t = ids[-1]
        lo, hi = depart_window
        dep = round(float(rng.uniform(lo, hi)), 3) if hi > lo else float(lo)
        out.append(Query(q, s, t, dep))
    return out


@dataclass(frozen=True)
class TrainingExample:
    features: np.ndarray
    label: int
    query_id: int
    t: float


@dataclass
class Dataset:
    examples: list[TrainingExample] = field(default_factory=list)
    k_max: int = 8
    n_skipped: int = 0

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def matrix(self) -> np.ndarray:
        return np.array([e.features for e in self.examples]).reshape(len(self.examples), -1)

    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.examples], dtype=np.int64)

    def masks(self) -> np.ndarray:
        return self.matrix()[:, valid_slot_index(self.k_max)] > 0.5

    def windows(self, window: int) -> np.ndarray:
        """(N, window, D) histories; consecutive examples of a query form one walk."""
        X = self.matrix()
        out = np.zeros((len(X), window, X.shape[1]))
        start = 0
        for i, ex in enumerate(self.examples):
            if i == 0 or ex.query_id != self.examples[i - 1].query_id:
                start = i
            lo = max(start, i - window + 1)
            out[i, window - (i - lo + 1):] = X[lo:i + 1]
        return out

    def inputs_for(self, model: NextEdgeModel) -> np.ndarray:
        return self.windows(model.window) if model.sequence else self.matrix()


def oracle_walk(g: RoadGraph, cfg: ScenarioConfig, q: Query,
                norm: Optional[FeatureNormalizer] = None) -> Optional[list[TrainingExample]]:
    """Examples along the snapshot-oracle walk for one query; None if unreachable.

    At every node the oracle runs context-aware Dijkstra on the snapshot
    frozen at the current time and takes the first edge of that path.
    """
    norm = norm or FeatureNormalizer.for_graph(g)
    node, now = q.origin, q.depart_s
    examples: list[TrainingExample] = []
    for _ in range(4 * g.num_nodes):
        if node == q.destination:
            break
        snap = snapshot_clamped(cfg, g, now)
        path = dijkstra(g, CostModel(CONTEXT, snap), node, q.destination)
        if path is None:
            return None
        eid = path.edge_seq[0]
        slot = g.adjacency[node].index(eid)
        examples.append(TrainingExample(encode_state(g, node, q.destination, snap, norm),
                                        slot, q.qid, now))
        now += edge_travel_time(g.edges[eid], snap)
        node = g.edges[eid].to
    return examples


def generate_training_set(g: RoadGraph, cfg: ScenarioConfig, n_queries: int, seed: int,
                          depart_window: Optional[tuple[float, float]] = None,
                          norm: Optional[FeatureNormalizer] = None) -> Dataset:
    if n_queries < 1:
        raise ValueError("n_queries must be >= 1")
    norm = norm or FeatureNormalizer.for_graph(g)
    window = depart_window if depart_window is not None else (0.0, cfg.duration_s)
    ds = Dataset(k_max=norm.k_max)
    for q in sample_queries(g, n_queries, seed, window):
        walk = oracle_walk(g, cfg, q, norm)
        if walk is None:
            ds.n_skipped += 1
            continue
        ds.examples.extend(walk)
    return ds


def save_dataset(ds: Dataset, path) -> None:
    names = feature_names(ds.k_max)
    lines = [f"# format_version: {DATASET_FORMAT_VERSION}",
             ",".join(["query_id", "t", "label"] + names)]
    for ex in ds.examples:
        vals = [str(ex.query_id), repr(float(ex.t)), str(ex.label)]
        vals += [repr(float(v)) for v in ex.features]
        lines.append(",".join(vals))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> Dataset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("# format_version:"):
        raise FormatError(f"{path}: missing format_version line")
    version = int(lines[0].split(":", 1)[1])
    if version != DATASET_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {version}")
    header = lines[1].split(",")
    k_max = (len(header) - 3 - len(BASE_FEATURES)) // len(SLOT_FEATURES)
    ds = Dataset(k_max=k_max)
    for line in lines[2:]:
        parts = line.split(",")
        ds.examples.append(TrainingExample(np.array([float(v) for v in parts[3:]]),
                                           int(parts[2]), int(parts[0]), float(parts[1])))
    return ds


# --- training ----------------------------------------------------------------

def train_policy(kind: str, ds: Dataset, cfg: TrainConfig, norm: FeatureNormalizer,
                 hidden: Optional[int] = None, window: int = 4):
    """Build and fit a next-edge model; returns ``(model, losses)``.

    ``losses[0]`` is the loss before the first update.
    """
    if len(ds) == 0:
        raise ValueError("empty training set")
    model = build_model(kind, n_features(norm.k_max), norm.k_max, seed=cfg.seed,
                        hidden=hidden, window=window,
                        meta={"normalizer": norm.to_dict()})
    X = ds.inputs_for(model)
    y = ds.labels()
    masks = ds.masks()
    losses = fit(model.params, lambda idx: model.loss_and_grad(X[idx], y[idx], masks[idx]),
                 len(ds), cfg)
    model.meta["train"] = {"epochs": cfg.epochs, "lr": cfg.learning_rate,
                           "batch_size": cfg.batch_size, "examples": len(ds)}
    return model, losses


def model_normalizer(model: NextEdgeModel, g: RoadGraph) -> FeatureNormalizer:
    d = model.meta.get("normalizer")
    return FeatureNormalizer.from_dict(d) if d else FeatureNormalizer.for_graph(g)


def predict_slots(model: NextEdgeModel, X, masks) -> np.ndarray:
    """Batched argmax over unmasked logits (ties to the lower slot)."""
    logits = model.logits(np.asarray(X, dtype=float))
    return np.argmax(np.where(masks, logits, -np.inf), axis=1)


# --- routing -----------------------------------------------------------------

def predict_next_edge(model: NextEdgeModel, features, candidates: Sequence[EdgeRecord],
                      mask: Optional[Sequence[bool]] = None) -> int:
    """Edge id of the highest-scoring usable candidate."""
    x = np.asarray(features, dtype=float)
    logits = model.logits(x[None, ...])[0]
    usable = np.zeros(logits.shape, dtype=bool)
    usable[: len(candidates)] = True if mask is None else np.asarray(mask, dtype=bool)[: len(candidates)]
    if not usable.any():
        raise ValueError("no valid candidate edge")
    return candidates[int(np.argmax(np.where(usable, logits, -np.inf)))].id


@dataclass(frozen=True)
class RolloutGuard:
    max_hops: Optional[int] = None
    fallback: str = "a_star"

    def __post_init__(self):
        if self.max_hops is not None and self.max_hops <= 0:
            raise ValueError("max_hops must be positive")
        if self.fallback != "a_star":
            raise ValueError("only the a_star fallback is supported")

    def hops_for(self, g: RoadGraph) -> int:
        return self.max_hops if self.max_hops is not None else 4 * g.num_nodes


@dataclass
class RolloutResult:
    path: Optional[PathResult]
    trace: list[tuple[float, int, float]]
    realized_time_s: float
    completed: bool
    used_fallback: bool = False


def _fallback_plan(g: RoadGraph, node: int, goal: int, taken: set) -> Optional[PathResult]:
    """Free-flow A* avoiding already-taken (node, edge) pairs when possible."""
    h = distance_heuristic(g, goal)
    if taken:
        costs = np.array(g.free_flow_time, copy=True)
        costs[[g.edge_index[e] for _, e in taken]] = np.inf
        plan = _search(g, costs, h, node, goal)[0]
        if plan is not None:
            return plan
    return _search(g, g.free_flow_time, h, node, goal)[0]


def rollout(model: NextEdgeModel, g: RoadGraph, cfg: ScenarioConfig,
            guard: RolloutGuard, s: int, t: int, depart_s: float = 0.0,
            norm: Optional[FeatureNormalizer] = None) -> RolloutResult:
    """Follow the model's choices from ``s`` until ``t``, with loop guards.

    Taken (node, edge) pairs are masked. When every candidate is masked,
    the node is a dead end, or ``max_hops`` is used up, the remainder is
    driven along a free-flow A* plan and ``used_fallback`` is set.
    """
    g.index_of(s)
    g.index_of(t)
    norm = norm or model_normalizer(g=g, model=model)
    now = float(depart_s)
    node = s
    taken: set[tuple[int, int]] = set()
    trace: list[tuple[float, int, float]] = []
    nodes = [s]
    history: list[np.ndarray] = []
    max_hops = guard.hops_for(g)
    fallback = False

    def drive(eid, snap):
        nonlocal now, node
        dt = edge_travel_time(g.edges[eid], snap)
        trace.append((now, eid, dt))
        now += dt
        node = g.edges[eid].to
        nodes.append(node)

    while node != t:
        if len(trace) >= max_hops:
            fallback = True
            break
        snap = snapshot_clamped(cfg, g, now)
        cands = out_edges(g, node)
        mask = [(node, e.id) not in taken for e in cands]
        if not any(mask):
            fallback = True
            break
        history.append(encode_state(g, node, t, snap, norm))
        x = stack_window(history, model.window) if model.sequence else history[-1]
        eid = predict_next_edge(model, x, cands, mask)
        taken.add((node, eid))
        drive(eid, snap)

    completed = True
    if fallback:
        plan = _fallback_plan(g, node, t, taken)
        if plan is None:
            completed = False
        else:
            for eid in plan.edge_seq:
                drive(eid, snapshot_clamped(cfg, g, now))
    edge_seq = tuple(e for _, e, _ in trace)
    path = None
    if completed:
        cost = 0.0
        for e in edge_seq:
            cost += g.free_flow_time[g.edge_index[e]]
        path = PathResult(tuple(nodes), edge_seq, float(cost), len(edge_seq))
    return RolloutResult(path, trace, now - float(depart_s), completed, fallback)
