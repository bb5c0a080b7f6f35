"""Time-varying traffic and weather context.

Scenarios are lists of congestion and weather events with a tent-shaped
temporal profile. :func:`snapshot_at` turns a scenario into per-edge
densities and per-zone severities at one instant; the penalty and
travel-time functions read those snapshots.
"""
from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError, ScenarioError, UnknownNodeError
from .graph import EdgeRecord, RoadGraph, check_format_version, haversine_array

SCENARIO_FORMAT_VERSION = 1

ALPHA = 0.9
BETA = 0.5
S_MIN = 0.05


@dataclass(frozen=True)
class CongestionEvent:
    center: int
    radius_m: float
    peak_density: float
    start_s: float
    end_s: float


@dataclass(frozen=True)
class WeatherEvent:
    zones: tuple[int, ...]
    severity: float
    start_s: float
    end_s: float


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    duration_s: float = 3600.0
    zone_grid: tuple[int, int] = (3, 3)
    congestion_events: tuple[CongestionEvent, ...] = ()
    weather_events: tuple[WeatherEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "zone_grid", tuple(int(z) for z in self.zone_grid))
        object.__setattr__(self, "congestion_events", tuple(self.congestion_events))
        object.__setattr__(self, "weather_events", tuple(self.weather_events))
        if not self.duration_s > 0:
            raise ScenarioError("duration_s must be positive")
        if len(self.zone_grid) != 2 or min(self.zone_grid) < 1:
            raise ScenarioError(f"zone_grid must be two counts >= 1, got {self.zone_grid}")
        n_zones = self.zone_grid[0] * self.zone_grid[1]
        for ev in self.congestion_events:
            self._check_window(ev.start_s, ev.end_s)
            if not 0.0 < ev.peak_density <= 1.0:
                raise ScenarioError(f"peak_density {ev.peak_density} not in (0, 1]")
            if not ev.radius_m > 0:
                raise ScenarioError("congestion radius_m must be positive")
        for ev in self.weather_events:
            self._check_window(ev.start_s, ev.end_s)
            if not 0.0 < ev.severity <= 1.0:
                raise ScenarioError(f"weather severity {ev.severity} not in (0, 1]")
            for z in ev.zones:
                if not 0 <= z < n_zones:
                    raise ScenarioError(f"weather zone {z} outside the {self.zone_grid} grid")

    def _check_window(self, start, end):
        if not 0.0 <= start <= end <= self.duration_s:
            raise ScenarioError(
                f"event window [{start}, {end}] not within [0, {self.duration_s}]"
            )

    @property
    def n_zones(self) -> int:
        return self.zone_grid[0] * self.zone_grid[1]

    @property
    def is_static(self) -> bool:
        return not self.congestion_events and not self.weather_events


@dataclass(frozen=True)
class PenaltyConstants:
    k_t: float = 600.0
    k_w: float = 300.0

    def __post_init__(self):
        if self.k_t < 0 or self.k_w < 0:
            raise ScenarioError("penalty constants must be non-negative")


def tent(t: float, start: float, end: float) -> float:
    """Linear ramp 0 -> 1 -> 0 over [start, end]; zero outside."""
    if end <= start or t <= start or t >= end:
        return 0.0
    mid = 0.5 * (start + end)
    if t <= mid:
        return (t - start) / (mid - start)
    return (end - t) / (end - mid)


class ZoneLayout:
    """Zone lookup for one (graph, zone_grid) pair.

    Zone index is ``row * cols + col`` with row/col from floor division of
    the coordinate offset within the bounding box; the max edge of the box
    folds into the last row/column.
    """

    def __init__(self, g: RoadGraph, zone_grid: tuple[int, int]):
        self.zone_grid = tuple(zone_grid)
        self.lat_min, self.lat_max, self.lon_min, self.lon_max = g.bbox()
        self.node_zone = self.zones_of(g.lat, g.lon)
        mid_lat, mid_lon = g.edge_midpoints()
        self.edge_zone = self.zones_of(mid_lat, mid_lon)
        self.node_zone.flags.writeable = False
        self.edge_zone.flags.writeable = False

    def zones_of(self, lat, lon) -> np.ndarray:
        zr, zc = self.zone_grid
        rows = _bin(np.asarray(lat, dtype=float), self.lat_min, self.lat_max, zr)
        cols = _bin(np.asarray(lon, dtype=float), self.lon_min, self.lon_max, zc)
        return rows * zc + cols


def _bin(x, lo, hi, n):
    span = hi - lo
    if span <= 0:
        return np.zeros(x.shape, dtype=np.int64)
    idx = np.floor((x - lo) / span * n).astype(np.int64)
    return np.clip(idx, 0, n - 1)


@dataclass(frozen=True, eq=False)
class ContextSnapshot:
    """Densities (by edge position) and severities (by zone) at time ``t``."""

    t: float
    density: np.ndarray
    severity: np.ndarray
    edge_index: Mapping[int, int] = field(repr=False)
    layout: ZoneLayout = field(repr=False)

    @property
    def traffic_density(self) -> dict[int, float]:
        return {eid: float(self.density[pos]) for eid, pos in self.edge_index.items()}

    @property
    def weather_severity(self) -> dict[int, float]:
        return {z: float(s) for z, s in enumerate(self.severity)}

    def edge_density(self, edge_id: int) -> float:
        try:
            return float(self.density[self.edge_index[edge_id]])
        except KeyError:
            raise ScenarioError(f"snapshot has no density entry for edge {edge_id}") from None

    def edge_severity(self, edge_id: int) -> float:
        try:
            pos = self.edge_index[edge_id]
        except KeyError:
            raise ScenarioError(f"snapshot has no entry for edge {edge_id}") from None
        return float(self.severity[self.layout.edge_zone[pos]])

    def to_bytes(self) -> bytes:
        return (np.float64(self.t).tobytes() + self.density.tobytes()
                + self.severity.tobytes())

    @classmethod
    def from_mappings(
        cls,
        g: RoadGraph,
        t: float = 0.0,
        densities: Mapping[int, float] | None = None,
        severities: Mapping[int, float] | None = None,
        zone_grid: tuple[int, int] = (1, 1),
    ) -> "ContextSnapshot":
        """Hand-built snapshot; unlisted edges and zones default to 0."""
        layout = ZoneLayout(g, zone_grid)
        density = np.zeros(g.num_edges)
        for eid, d in (densities or {}).items():
            density[g.edge_index[eid]] = d
        severity = np.zeros(zone_grid[0] * zone_grid[1])
        for z, s in (severities or {}).items():
            severity[z] = s
        if density.size and not (0.0 <= density.min() and density.max() <= 1.0):
            raise ScenarioError("densities must lie in [0, 1]")
        if severity.size and not (0.0 <= severity.min() and severity.max() <= 1.0):
            raise ScenarioError("severities must lie in [0, 1]")
        density.flags.writeable = False
        severity.flags.writeable = False
        return cls(float(t), density, severity, g.edge_index, layout)


@functools.lru_cache(maxsize=64)
def _spatial_terms(cfg: ScenarioConfig, g: RoadGraph):
    """Per-event spatial weights and the zone layout; depends only on (cfg, g)."""
    layout = ZoneLayout(g, cfg.zone_grid)
    mid_lat, mid_lon = g.edge_midpoints()
    weights = np.zeros((len(cfg.congestion_events), g.num_edges))
    for i, ev in enumerate(cfg.congestion_events):
        c = g.node(ev.center)
        d = haversine_array(mid_lat, mid_lon, c.lat, c.lon)
        weights[i] = ev.peak_density * np.maximum(0.0, 1.0 - d / ev.radius_m)
    zone_masks = np.zeros((len(cfg.weather_events), cfg.n_zones))
    for i, ev in enumerate(cfg.weather_events):
        zone_masks[i, list(ev.zones)] = ev.severity
    return layout, weights, zone_masks


def snapshot_at(cfg: ScenarioConfig, g: RoadGraph, t: float) -> ContextSnapshot:
    """Context at time ``t``; a pure function of ``(cfg, g, t)``."""
    if not 0.0 <= t <= cfg.duration_s:
        raise ScenarioError(f"t={t} outside [0, {cfg.duration_s}]")
    layout, weights, zone_masks = _spatial_terms(cfg, g)
    density = np.zeros(g.num_edges)
    for i, ev in enumerate(cfg.congestion_events):
        w = tent(t, ev.start_s, ev.end_s)
        if w > 0.0:
            density += w * weights[i]
    np.minimum(density, 1.0, out=density)
    severity = np.zeros(cfg.n_zones)
    for i, ev in enumerate(cfg.weather_events):
        w = tent(t, ev.start_s, ev.end_s)
        if w > 0.0:
            severity += w * zone_masks[i]
    np.minimum(severity, 1.0, out=severity)
    density.flags.writeable = False
    severity.flags.writeable = False
    return ContextSnapshot(float(t), density, severity, g.edge_index, layout)


def snapshot_clamped(cfg: ScenarioConfig, g: RoadGraph, t: float) -> ContextSnapshot:
    """Like :func:`snapshot_at` but holds the end state for t > duration_s."""
    return snapshot_at(cfg, g, min(max(t, 0.0), cfg.duration_s))


def _node_positions(g: RoadGraph, n: int) -> tuple[int, int]:
    i = g.index_of(n)
    return int(g.indptr[i]), int(g.indptr[i + 1])


def node_density(snap: ContextSnapshot, g: RoadGraph, n: int) -> float:
    """Worst out-edge density at ``n``; 0 for dead ends."""
    lo, hi = _node_positions(g, n)
    if lo == hi:
        return 0.0
    return float(snap.density[lo:hi].max())


def node_density_array(snap: ContextSnapshot, g: RoadGraph) -> np.ndarray:
    """:func:`node_density` for every node index at once."""
    out = np.zeros(g.num_nodes)
    if g.num_edges:
        np.maximum.at(out, g.edge_from, snap.density)
    return out


def node_severity(snap: ContextSnapshot, g: RoadGraph, n: int) -> float:
    return float(snap.severity[snap.layout.node_zone[g.index_of(n)]])


def traffic_penalty(n: int, snap: ContextSnapshot, g: RoadGraph, k: PenaltyConstants) -> float:
    return k.k_t * node_density(snap, g, n)


def weather_penalty(n: int, snap: ContextSnapshot, g: RoadGraph, k: PenaltyConstants) -> float:
    return k.k_w * node_severity(snap, g, n)


def penalty_array(snap: ContextSnapshot, g: RoadGraph, k: PenaltyConstants) -> np.ndarray:
    """traffic_penalty + weather_penalty for every node index."""
    return (k.k_t * node_density_array(snap, g)
            + k.k_w * snap.severity[snap.layout.node_zone])


def slowdown(density, severity, alpha: float = ALPHA, beta: float = BETA, s_min: float = S_MIN):
    return np.maximum(s_min, (1.0 - alpha * np.asarray(density)) * (1.0 - beta * np.asarray(severity)))


def edge_travel_time(
    e: EdgeRecord,
    snap: ContextSnapshot,
    alpha: float = ALPHA,
    beta: float = BETA,
    s_min: float = S_MIN,
) -> float:
    density = snap.edge_density(e.id)
    severity = snap.edge_severity(e.id)
    slow = max(s_min, (1.0 - alpha * density) * (1.0 - beta * severity))
    return e.length_m / (e.free_flow_speed_mps * slow)


def edge_time_array(snap: ContextSnapshot, g: RoadGraph) -> np.ndarray:
    """Context-adjusted traversal time for every edge position."""
    slow = slowdown(snap.density, snap.severity[snap.layout.edge_zone])
    return g.edge_length / (g.edge_speed * slow)


def edge_time_at(cfg: ScenarioConfig, g: RoadGraph, edge_id: int, t: float) -> float:
    """Traversal time of one edge entered at ``t`` (end state held past duration)."""
    return edge_travel_time(g.edges[edge_id], snapshot_clamped(cfg, g, t))


# --- scenario generation and file format -----------------------------------

def generate_scenario(
    g: RoadGraph,
    duration_s: float = 3600.0,
    n_congestion: int = 5,
    n_weather: int = 2,
    seed: int = 0,
    zone_grid: tuple[int, int] = (3, 3),
    radius_frac: tuple[float, float] = (0.15, 0.3),
    window_frac: tuple[float, float] = (0.3, 0.6),
) -> ScenarioConfig:
    """Random events drawn from ``seed``.

    Radii are fractions of the bounding-box diagonal; windows are
    fractions of ``duration_s`` placed uniformly inside it.
    """
    if n_congestion < 0 or n_weather < 0:
        raise ScenarioError("event counts must be non-negative")
    rng = np.random.default_rng(seed)
    lat_min, lat_max, lon_min, lon_max = g.bbox()
    diag = float(haversine_array(lat_min, lon_min, lat_max, lon_max))
    diag = diag if diag > 0 else 1.0
    node_ids = list(g.nodes)

    def window():
        length = duration_s * float(rng.uniform(*window_frac))
        start = float(rng.uniform(0.0, duration_s - length))
        return round(start, 3), round(min(duration_s, start + length), 3)

    congestion = []
    for _ in range(n_congestion):
        center = node_ids[int(rng.integers(len(node_ids)))]
        radius = round(diag * float(rng.uniform(*radius_frac)), 3)
        peak = round(float(rng.uniform(0.6, 1.0)), 4)
        start, end = window()
        congestion.append(CongestionEvent(center, radius, peak, start, end))
    n_zones = zone_grid[0] * zone_grid[1]
    weather = []
    for _ in range(n_weather):
        k = int(rng.integers(1, min(3, n_zones) + 1))
        zones = tuple(sorted(int(z) for z in rng.choice(n_zones, size=k, replace=False)))
        sev = round(float(rng.uniform(0.4, 1.0)), 4)
        start, end = window()
        weather.append(WeatherEvent(zones, sev, start, end))
    return ScenarioConfig(seed, float(duration_s), tuple(zone_grid), tuple(congestion), tuple(weather))


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "format_version": SCENARIO_FORMAT_VERSION,
        "seed": cfg.seed,
        "duration_s": cfg.duration_s,
        "zone_grid": list(cfg.zone_grid),
        "congestion_events": [
            {"center": e.center, "radius_m": e.radius_m, "peak_density": e.peak_density,
             "start_s": e.start_s, "end_s": e.end_s}
            for e in cfg.congestion_events
        ],
        "weather_events": [
            {"zones": list(e.zones), "severity": e.severity, "start_s": e.start_s, "end_s": e.end_s}
            for e in cfg.weather_events
        ],
    }


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise FormatError("scenario document must be an object")
    check_format_version(doc, "scenario", SCENARIO_FORMAT_VERSION)
    try:
        return ScenarioConfig(
            seed=int(doc.get("seed", 0)),
            duration_s=float(doc["duration_s"]),
            zone_grid=tuple(doc.get("zone_grid", (3, 3))),
            congestion_events=tuple(
                CongestionEvent(int(e["center"]), float(e["radius_m"]), float(e["peak_density"]),
                                float(e["start_s"]), float(e["end_s"]))
                for e in doc.get("congestion_events", [])
            ),
            weather_events=tuple(
                WeatherEvent(tuple(int(z) for z in e["zones"]), float(e["severity"]),
                             float(e["start_s"]), float(e["end_s"]))
                for e in doc.get("weather_events", [])
            ),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed scenario document: {exc!r}") from exc


def validate_scenario_for_graph(cfg: ScenarioConfig, g: RoadGraph) -> None:
    for ev in cfg.congestion_events:
        if ev.center not in g.nodes:
            raise UnknownNodeError(ev.center)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=1) + "\n", encoding="utf-8")
