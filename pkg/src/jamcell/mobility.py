"""STEPS mobility: power-law zone attraction and power-law stay times.

Nodes live on a Z x Z grid of square zones. When a node's stay expires it
draws a Chebyshev distance ``d`` from its preferred zone with probability
proportional to ``(1 + d) ** -alpha``, jumps to a uniformly chosen zone at
that distance and draws a new stay from ``t ** -tau``. Within a zone it
performs random-waypoint motion at constant speed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class StepsConfig:
    grid_size: int = 10
    zone_side_m: float = 100.0
    alpha: float = 2.0
    tau: float = 1.5
    t_max: int = 100
    epoch_duration_s: float = 0.01
    speed_mps: float = 10.0
    origin_m: tuple[float, float] = (0.0, 0.0)
    cell_radius_m: float | None = None

    def __post_init__(self):
        if self.grid_size < 1:
            raise ValueError("grid_size must be >= 1")
        if self.zone_side_m <= 0:
            raise ValueError("zone_side_m must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.epoch_duration_s <= 0 or self.speed_mps < 0:
            raise ValueError("epoch duration must be positive and speed non-negative")

    @property
    def side_m(self) -> float:
        return self.grid_size * self.zone_side_m

    @property
    def center_m(self) -> np.ndarray:
        return np.asarray(self.origin_m) + self.side_m / 2

    def zone_of(self, position) -> tuple[int, int]:
        rel = (np.asarray(position, dtype=float) - np.asarray(self.origin_m)) / self.zone_side_m
        ij = np.clip(np.floor(rel).astype(int), 0, self.grid_size - 1)
        return int(ij[0]), int(ij[1])

    def zone_bounds(self, zone) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin_m) + np.asarray(zone, dtype=float) * self.zone_side_m
        return lo, lo + self.zone_side_m

    def valid_zones(self) -> np.ndarray:
        """(n, 2) zone coordinates usable by nodes; with a cell radius,
        zones whose center falls outside the disk are excluded."""
        ij = np.stack(np.meshgrid(np.arange(self.grid_size), np.arange(self.grid_size),
                                  indexing="ij"), axis=-1).reshape(-1, 2)
        if self.cell_radius_m is None:
            return ij
        centers = np.asarray(self.origin_m) + (ij + 0.5) * self.zone_side_m
        inside = np.hypot(*(centers - self.center_m).T) <= self.cell_radius_m
        return ij[inside]


@dataclass(frozen=True)
class StepsState:
    preferred_zone: tuple[int, int]
    current_zone: tuple[int, int]
    position_m: tuple[float, float]
    stay_remaining: int
    waypoint_m: tuple[float, float] | None = None


def zone_distance_pmf(alpha: float, d_max: int) -> np.ndarray:
    if d_max < 0:
        raise ValueError("d_max must be >= 0")
    w = (1.0 + np.arange(d_max + 1)) ** -float(alpha)
    return w / w.sum()


def stay_time_pmf(tau: float, t_max: int) -> np.ndarray:
    """Probabilities of stays 1..t_max epochs."""
    if tau <= 0 or t_max < 1:
        raise ValueError("need tau > 0 and t_max >= 1")
    w = np.arange(1, t_max + 1, dtype=float) ** -float(tau)
    return w / w.sum()


def chebyshev(a, b) -> np.ndarray:
    return np.max(np.abs(np.asarray(a) - np.asarray(b)), axis=-1)


def _draw(pmf: np.ndarray, rng: np.random.Generator) -> int:
    return int(min(np.searchsorted(np.cumsum(pmf), rng.random(), side="right"), pmf.size - 1))


def _clip_to_cell(point: np.ndarray, cfg: StepsConfig) -> np.ndarray:
    if cfg.cell_radius_m is None:
        return point
    rel = point - cfg.center_m
    r = np.hypot(*rel)
    if r <= cfg.cell_radius_m:
        return point
    return cfg.center_m + rel * (cfg.cell_radius_m / r)


def _random_point(zone, cfg: StepsConfig, rng: np.random.Generator) -> np.ndarray:
    lo, hi = cfg.zone_bounds(zone)
    return _clip_to_cell(lo + rng.random(2) * (hi - lo), cfg)


class _ZoneTable:
    """Valid zones grouped by Chebyshev ring around each preferred zone."""

    def __init__(self, cfg: StepsConfig):
        self.cfg = cfg
        self.zones = cfg.valid_zones()
        self._cache: dict[tuple[int, int], tuple[list[np.ndarray], np.ndarray]] = {}

    def rings(self, preferred) -> tuple[list[np.ndarray], np.ndarray]:
        key = (int(preferred[0]), int(preferred[1]))
        if key not in self._cache:
            d = chebyshev(self.zones, key)
            rings = [self.zones[d == k] for k in range(int(d.max()) + 1)]
            pmf = zone_distance_pmf(self.cfg.alpha, len(rings) - 1)
            pmf = np.where([r.size > 0 for r in rings], pmf, 0.0)
            self._cache[key] = (rings, pmf / pmf.sum())
        return self._cache[key]


_TABLES: dict[StepsConfig, _ZoneTable] = {}


def _table(cfg: StepsConfig) -> _ZoneTable:
    if cfg not in _TABLES:
        _TABLES[cfg] = _ZoneTable(cfg)
    return _TABLES[cfg]


def _move_within_zone(state: StepsState, cfg: StepsConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(state.position_m, dtype=float)
    target = (np.asarray(state.waypoint_m, dtype=float) if state.waypoint_m is not None
              else _random_point(state.current_zone, cfg, rng))
    step = cfg.speed_mps * cfg.epoch_duration_s
    gap = np.hypot(*(target - pos))
    if gap <= step:
        return target, _random_point(state.current_zone, cfg, rng)
    return pos + (target - pos) * (step / gap), target


def steps_step(state: StepsState, cfg: StepsConfig, rng: np.random.Generator) -> StepsState:
    """Advance one node by one mobility epoch."""
    if state.stay_remaining > 0:
        pos, waypoint = _move_within_zone(state, cfg, rng)
        return replace(state, position_m=(float(pos[0]), float(pos[1])),
                       stay_remaining=state.stay_remaining - 1,
                       waypoint_m=(float(waypoint[0]), float(waypoint[1])))
    rings, pmf = _table(cfg).rings(state.preferred_zone)
    d = _draw(pmf, rng)
    candidates = rings[d]
    zone = candidates[rng.integers(candidates.shape[0])]
    zone = (int(zone[0]), int(zone[1]))
    pos = _random_point(zone, cfg, rng)
    # the transition epoch counts as the first epoch of the stay
    stay = _draw(stay_time_pmf(cfg.tau, cfg.t_max), rng) + 1
    waypoint = _random_point(zone, cfg, rng)
    return StepsState(state.preferred_zone, zone, (float(pos[0]), float(pos[1])),
                      stay - 1, (float(waypoint[0]), float(waypoint[1])))


def initial_state(cfg: StepsConfig, rng: np.random.Generator, position=None) -> StepsState:
    """Node starting at ``position`` (or a random valid zone); that zone is preferred."""
    if position is None:
        zones = cfg.valid_zones()
        zone = tuple(int(v) for v in zones[rng.integers(zones.shape[0])])
        pos = _random_point(zone, cfg, rng)
    else:
        pos = np.asarray(position, dtype=float)
        zone = cfg.zone_of(pos)
    stay = _draw(stay_time_pmf(cfg.tau, cfg.t_max), rng)
    return StepsState(zone, zone, (float(pos[0]), float(pos[1])), stay)


def generate_trace(cfg: StepsConfig, n_nodes: int, duration_s: float, seed) -> np.ndarray:
    """Positions of shape (n_epochs, n_nodes, 2); epoch 0 is the initial placement."""
    n_epochs = duration_s / cfg.epoch_duration_s
    if n_nodes < 1 or n_epochs < 1 or abs(n_epochs - round(n_epochs)) > 1e-9:
        raise ValueError("duration must be a positive multiple of the epoch duration")
    n_epochs = int(round(n_epochs))
    streams = np.random.SeedSequence(seed).spawn(n_nodes)
    out = np.empty((n_epochs, n_nodes, 2))
    for j, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        state = initial_state(cfg, rng)
        out[0, j] = state.position_m
        for e in range(1, n_epochs):
            state = steps_step(state, cfg, rng)
            out[e, j] = state.position_m
    return out


def write_trace_csv(trace: np.ndarray, fh, header_lines=()) -> None:
    for line in header_lines:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epoch", "node_id", "x_m", "y_m"])
    for e in range(trace.shape[0]):
        for j in range(trace.shape[1]):
            w.writerow([e, j, repr(float(trace[e, j, 0])), repr(float(trace[e, j, 1]))])
