"""Directed road network: records, validation, file I/O and generators.

A :class:`RoadGraph` is immutable once built. Besides the id-keyed
records it keeps dense numpy arrays in a CSR layout (edges grouped by
source node, ascending edge id inside each group) which the search
kernels consume directly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, GraphValidationError, UnknownNodeError

EARTH_RADIUS_M = 6_371_000.0
DEFAULT_K_MAX = 8
GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NodeRecord:
    id: int
    lat: float
    lon: float


@dataclass(frozen=True)
class EdgeRecord:
    id: int
    from_: int
    to: int
    length_m: float
    free_flow_speed_mps: float

    @property
    def free_flow_time_s(self) -> float:
        return self.length_m / self.free_flow_speed_mps


def great_circle_distance(a, b) -> float:
    """Haversine distance in meters between two objects with lat/lon."""
    if a.lat == b.lat and a.lon == b.lon:
        return 0.0
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    s = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(s)))


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine; same formula as :func:`great_circle_distance`."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2, dtype=float) - np.asarray(lon1, dtype=float))
    s = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(s)))


class RoadGraph:
    """Validated directed road network.

    Node indices (``node_index``) follow ascending node id, so comparing
    indices is the same as comparing ids. Edge positions (``edge_index``)
    follow the CSR order: source node index, then edge id.
    """

    def __init__(
        self,
        nodes: Iterable[NodeRecord],
        edges: Iterable[EdgeRecord],
        k_max: int = DEFAULT_K_MAX,
    ):
        nodes = list(nodes)
        edges = list(edges)
        self.k_max = int(k_max)
        self.nodes: dict[int, NodeRecord] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise GraphValidationError(f"duplicate node id {n.id}")
            if not (-90.0 <= n.lat <= 90.0) or not (-180.0 <= n.lon <= 180.0):
                raise GraphValidationError(f"coordinates out of range at node {n.id}")
            if n.id < 0:
                raise GraphValidationError(f"negative node id {n.id}")
            self.nodes[n.id] = n
        self.nodes = dict(sorted(self.nodes.items()))

        self.edges: dict[int, EdgeRecord] = {}
        for e in edges:
            if e.id in self.edges:
                raise GraphValidationError(f"duplicate edge id {e.id}")
            if e.id < 0:
                raise GraphValidationError(f"negative edge id {e.id}")
            if e.from_ == e.to:
                raise GraphValidationError(f"self-loop: edge {e.id} at node {e.from_}")
            for end in (e.from_, e.to):
                if end not in self.nodes:
                    raise GraphValidationError(
                        f"dangling endpoint: edge {e.id} references missing node {end}"
                    )
            if not e.length_m > 0 or not math.isfinite(e.length_m):
                raise GraphValidationError(f"non-positive length on edge {e.id}")
            if not e.free_flow_speed_mps > 0 or not math.isfinite(e.free_flow_speed_mps):
                raise GraphValidationError(f"non-positive speed on edge {e.id}")
            self.edges[e.id] = e

        out: dict[int, list[int]] = {nid: [] for nid in self.nodes}
        for e in self.edges.values():
            out[e.from_].append(e.id)
        self.adjacency: dict[int, tuple[int, ...]] = {}
        for nid, ids in out.items():
            if len(ids) > self.k_max:
                raise GraphValidationError(
                    f"out-degree {len(ids)} > K_max={self.k_max} at node {nid}"
                )
            self.adjacency[nid] = tuple(sorted(ids))

        self._build_arrays()

    def _build_arrays(self) -> None:
        self.node_ids = np.fromiter(self.nodes, dtype=np.int64, count=len(self.nodes))
        self.node_index = {nid: i for i, nid in enumerate(self.nodes)}
        self.lat = np.array([n.lat for n in self.nodes.values()], dtype=float)
        self.lon = np.array([n.lon for n in self.nodes.values()], dtype=float)

        order = [eid for nid in self.nodes for eid in self.adjacency[nid]]
        self.edge_ids = np.array(order, dtype=np.int64)
        self.edge_index = {eid: i for i, eid in enumerate(order)}
        recs = [self.edges[eid] for eid in order]
        self.edge_from = np.array([self.node_index[e.from_] for e in recs], dtype=np.int64)
        self.edge_to = np.array([self.node_index[e.to] for e in recs], dtype=np.int64)
        self.edge_length = np.array([e.length_m for e in recs], dtype=float)
        self.edge_speed = np.array([e.free_flow_speed_mps for e in recs], dtype=float)
        self.free_flow_time = self.edge_length / self.edge_speed
        counts = np.bincount(self.edge_from, minlength=len(self.nodes))
        self.indptr = np.zeros(len(self.nodes) + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self.v_max = float(self.edge_speed.max()) if len(recs) else 1.0
        for arr in (self.node_ids, self.lat, self.lon, self.edge_ids, self.edge_from,
                    self.edge_to, self.edge_length, self.edge_speed, self.free_flow_time,
                    self.indptr):
            arr.flags.writeable = False

    def __repr__(self) -> str:
        return f"RoadGraph(|V|={len(self.nodes)}, |E|={len(self.edges)})"

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def node(self, n: int) -> NodeRecord:
        try:
            return self.nodes[n]
        except KeyError:
            raise UnknownNodeError(n) from None

    def index_of(self, n: int) -> int:
        try:
            return self.node_index[n]
        except KeyError:
            raise UnknownNodeError(n) from None

    def bbox(self) -> tuple[float, float, float, float]:
        """(lat_min, lat_max, lon_min, lon_max)."""
        return (float(self.lat.min()), float(self.lat.max()),
                float(self.lon.min()), float(self.lon.max()))

    def edge_midpoints(self) -> tuple[np.ndarray, np.ndarray]:
        lat = 0.5 * (self.lat[self.edge_from] + self.lat[self.edge_to])
        lon = 0.5 * (self.lon[self.edge_from] + self.lon[self.edge_to])
        return lat, lon

    def distances_to(self, n: int) -> np.ndarray:
        """Great-circle distance from every node (by index) to node ``n``."""
        i = self.index_of(n)
        d = haversine_array(self.lat, self.lon, self.lat[i], self.lon[i])
        d[i] = 0.0
        return d

    def to_dict(self) -> dict:
        return {
            "format_version": GRAPH_FORMAT_VERSION,
            "k_max": self.k_max,
            "nodes": [{"id": n.id, "lat": n.lat, "lon": n.lon} for n in self.nodes.values()],
            "edges": [
                {"id": e.id, "from": e.from_, "to": e.to,
                 "length_m": e.length_m, "speed_mps": e.free_flow_speed_mps}
                for e in sorted(self.edges.values(), key=lambda e: e.id)
            ],
        }


def out_edges(g: RoadGraph, n: int) -> tuple[EdgeRecord, ...]:
    """Out-edges of ``n`` in ascending edge-id order."""
    try:
        ids = g.adjacency[n]
    except KeyError:
        raise UnknownNodeError(n) from None
    return tuple(g.edges[i] for i in ids)


def check_format_version(doc: dict, what: str, supported: int = 1) -> None:
    version = doc.get("format_version")
    if version is None:
        raise FormatError(f"{what}: missing format_version")
    if not isinstance(version, int) or isinstance(version, bool) or not 1 <= version <= supported:
        raise FormatError(
            f"{what}: unsupported format_version {version!r} (this build reads <= {supported})"
        )


def graph_from_dict(doc: dict, k_max: int | None = None) -> RoadGraph:
    if not isinstance(doc, dict):
        raise FormatError("graph document must be an object")
    check_format_version(doc, "graph", GRAPH_FORMAT_VERSION)
    try:
        nodes = [NodeRecord(int(n["id"]), float(n["lat"]), float(n["lon"])) for n in doc["nodes"]]
        edges = [
            EdgeRecord(int(e["id"]), int(e["from"]), int(e["to"]),
                       float(e["length_m"]), float(e["speed_mps"]))
            for e in doc["edges"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed graph document: {exc!r}") from exc
    if k_max is None:
        k_max = int(doc.get("k_max", DEFAULT_K_MAX))
    return RoadGraph(nodes, edges, k_max=k_max)


def load_graph(path, k_max: int | None = None) -> RoadGraph:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return graph_from_dict(doc, k_max=k_max)


def save_graph(g: RoadGraph, path) -> None:
    Path(path).write_text(json.dumps(g.to_dict(), indent=1) + "\n", encoding="utf-8")


def generate_grid_graph(
    rows: int,
    cols: int,
    spacing_m: float = 100.0,
    origin: tuple[float, float] = (52.52, 13.405),
    speed_mps: float = 13.9,
    k_max: int = DEFAULT_K_MAX,
) -> RoadGraph:
    """4-neighbour grid with two directed edges per adjacency.

    Node ``r * cols + c`` sits ``r`` rows north and ``c`` columns east of
    ``origin``. The longitude step uses the row latitude with the largest
    cosine, so no east-west neighbour pair is farther apart on the sphere
    than ``spacing_m`` (keeps the distance heuristic admissible).
    """
    if rows < 2 or cols < 2:
        raise GraphValidationError(f"grid needs rows, cols >= 2 (got {rows}x{cols})")
    if not spacing_m > 0 or not speed_mps > 0:
        raise GraphValidationError("spacing_m and speed_mps must be positive")
    lat0, lon0 = origin
    dlat = math.degrees(spacing_m / EARTH_RADIUS_M)
    row_lat = [lat0 + r * dlat for r in range(rows)]
    cos_max = max(math.cos(math.radians(la)) for la in row_lat)
    dlon = math.degrees(spacing_m / (EARTH_RADIUS_M * cos_max))

    nodes = [NodeRecord(r * cols + c, row_lat[r], lon0 + c * dlon)
             for r in range(rows) for c in range(cols)]
    edges: list[EdgeRecord] = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            for dr, dc in ((1, 0), (0, 1), (-1, 0), (0, -1)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols:
                    edges.append(EdgeRecord(len(edges), u, rr * cols + cc, spacing_m, speed_mps))
    return RoadGraph(nodes, edges, k_max=k_max)


def generate_random_graph(
    n_nodes: int,
    n_edges: int,
    seed: int,
    box_m: float = 2000.0,
    origin: tuple[float, float] = (52.52, 13.405),
    speed_range: tuple[float, float] = (5.0, 20.0),
    detour_range: tuple[float, float] = (1.0, 1.5),
    k_max: int = DEFAULT_K_MAX,
) -> RoadGraph:
    """Random geometric digraph for property tests and kernel benchmarks.

    Edge lengths are the endpoint great-circle distance times a detour
    factor >= 1, so the straight-line heuristic stays admissible. Edges
    are drawn among near neighbours and capped at ``k_max`` per node;
    fewer than ``n_edges`` may result when the cap binds.
    """
    if n_nodes < 2:
        raise GraphValidationError("need at least two nodes")
    rng = np.random.default_rng(seed)
    lat0, lon0 = origin
    dlat = math.degrees(box_m / EARTH_RADIUS_M)
    dlon = math.degrees(box_m / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    lat = lat0 + rng.random(n_nodes) * dlat
    lon = lon0 + rng.random(n_nodes) * dlon
    nodes = [NodeRecord(i, float(lat[i]), float(lon[i])) for i in range(n_nodes)]

    d = haversine_array(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    np.fill_diagonal(d, np.inf)
    near = np.argsort(d, axis=1, kind="stable")[:, : min(n_nodes - 1, 2 * k_max)]
    outdeg = np.zeros(n_nodes, dtype=int)
    seen: set[tuple[int, int]] = set()
    edges: list[EdgeRecord] = []
    attempts = 0
    while len(edges) < n_edges and attempts < 20 * n_edges:
        attempts += 1
        u = int(rng.integers(n_nodes))
        v = int(near[u, rng.integers(near.shape[1])])
        if outdeg[u] >= k_max or (u, v) in seen:
            continue
        seen.add((u, v))
        outdeg[u] += 1
        length = float(d[u, v]) * float(rng.uniform(*detour_range))
        if length <= 0.0:
            length = 1.0
        speed = float(rng.uniform(*speed_range))
        edges.append(EdgeRecord(len(edges), u, v, length, speed))
    return RoadGraph(nodes, edges, k_max=k_max)


def path_is_connected(g: RoadGraph, node_seq: Sequence[int], edge_seq: Sequence[int]) -> bool:
    if len(node_seq) != len(edge_seq) + 1:
        return False
    for i, eid in enumerate(edge_seq):
        e = g.edges.get(eid)
        if e is None or e.from_ != node_seq[i] or e.to != node_seq[i + 1]:
            return False
    return True
