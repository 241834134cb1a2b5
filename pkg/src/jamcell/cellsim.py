"""System-level downlink cell simulation with jammers, MCS adaptation and HARQ.

Accounting: throughput counts every transmitted transport block (new and
retransmitted) and goodput only blocks carrying new data, both in bits/s.
"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import cdl_a, dbm_to_watt, fspl_db, noise_power_re_dbm, tap_bins, wideband_gain
from .jammer import JammerKind, JammerSpec
from .mobility import StepsConfig, initial_state, steps_step
from .receiver import DEFAULT_BLER_SLOPE, DEFAULT_MCS_TABLE, McsEntry, sinr_to_bler
from .waveform import SUBCARRIERS_PER_RB, build_numerology

log = logging.getLogger(__name__)

JAMMER_DISTANCE_M = 224.0
# azimuth order used when jammers are added one at a time
JAMMER_AZIMUTHS_DEG = (0.0, 120.0, 240.0, 60.0, 180.0, 300.0)
MIN_DISTANCE_M = 1.0


class Traffic(enum.Enum):
    FULL_BUFFER = "full_buffer"
    CBR = "cbr"


class SweepAxis(enum.Enum):
    JAM_POWER = "jam_power"
    JAM_DISTANCE = "jam_distance"
    N_JAMMERS = "n_jammers"


def default_mobility(cell_radius_m: float = 500.0) -> StepsConfig:
    return StepsConfig(grid_size=10, zone_side_m=2 * cell_radius_m / 10, alpha=2.0, tau=1.5,
                       t_max=100, epoch_duration_s=0.01, speed_mps=10.0,
                       origin_m=(-cell_radius_m, -cell_radius_m), cell_radius_m=cell_radius_m)


@dataclass(frozen=True)
class Scenario:
    n_ue: int = 20
    cell_radius_m: float = 500.0
    gnb_power_dbm: float = 32.0
    gnb_gain_db: float = 0.0
    ue_gain_db: float = 0.0
    n_rb: int = 51
    scs: float = 30e3
    carrier_hz: float = 2.635e9
    noise_figure_db: float = 7.0
    jammers: tuple[JammerSpec, ...] = ()
    mobility: StepsConfig | None = field(default_factory=default_mobility)
    traffic: Traffic = Traffic.FULL_BUFFER
    app_rate_bps: float = 16e3
    sdu_bits: int = 9000
    duration_frames: int = 200
    seed: int = 0
    harq_max_attempts: int = 4
    mcs_table: tuple[McsEntry, ...] = DEFAULT_MCS_TABLE
    bler_slope: float = DEFAULT_BLER_SLOPE
    mcs_backoff_db: float = 1.0
    n_data_symbols: int = 12
    fading: bool = True
    delay_spread_ns: float = 30.0
    ue_positions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.n_ue < 1:
            raise ValueError("n_ue must be >= 1")
        if self.cell_radius_m <= 0 or self.duration_frames < 1:
            raise ValueError("cell radius and duration must be positive")
        if self.harq_max_attempts < 1:
            raise ValueError("harq_max_attempts must be >= 1")
        if not self.mcs_table:
            raise ValueError("MCS table is empty")
        if self.ue_positions is not None:
            if len(self.ue_positions) != self.n_ue:
                raise ValueError("ue_positions must list one position per UE")
            if any(np.hypot(*p) > self.cell_radius_m for p in self.ue_positions):
                raise ValueError("initial UE positions must lie inside the cell")
        object.__setattr__(self, "traffic", Traffic(self.traffic))


@dataclass
class HarqProcess:
    sdu_id: int
    bits: int
    mcs: int
    attempts: int = 1
    max_attempts: int = 4

    @property
    def pending(self) -> bool:
        return self.attempts < self.max_attempts


@dataclass
class UeLog:
    sinr_db: list[float] = field(default_factory=list)
    bler: list[float] = field(default_factory=list)
    tx_count: int = 0
    retx_count: int = 0
    dropped: int = 0


@dataclass
class CellMetrics:
    throughput_bps: float
    goodput_bps: float
    per_ue: list[UeLog]
    mean_sinr_db: float = float("nan")
    retx_fraction: float = 0.0


def account(tb_log, duration_s: float) -> tuple[float, float]:
    """(throughput, goodput) in bits/s from (bits, is_retransmission) records."""
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    total = new = 0
    for bits, is_retx in tb_log:
        total += bits
        if not is_retx:
            new += bits
    return total / duration_s, new / duration_s


def select_mcs(wideband_sinr_db: float, mcs_table=DEFAULT_MCS_TABLE, backoff_db: float = 0.0) -> int:
    """Index of the highest MCS whose threshold plus backoff fits the SINR."""
    if not mcs_table:
        raise ValueError("MCS table is empty")
    thresholds = [e.threshold_db for e in mcs_table]
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("MCS thresholds must be sorted")
    best = 0
    for i, th in enumerate(thresholds):
        if th + backoff_db <= wideband_sinr_db:
            best = i
    return best


def tb_capacity_bits(entry: McsEntry, n_rb: int, n_data_symbols: int) -> int:
    return int(SUBCARRIERS_PER_RB * n_rb * n_data_symbols * entry.bits_per_symbol * entry.code_rate)


def uniform_disk(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * np.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _pdsch_jam_re_power(spec: JammerSpec, n_rb: int) -> float:
    # smart kinds only hit SSB REs, which never carry PDSCH
    if spec.kind is not JammerKind.BARRAGE:
        return 0.0
    return float(dbm_to_watt(spec.tx_power_dbm)) / (SUBCARRIERS_PER_RB * n_rb)


def _gain(carrier_hz: float, a: np.ndarray, b) -> np.ndarray:
    d = np.maximum(np.hypot(a[:, 0] - b[0], a[:, 1] - b[1]), MIN_DISTANCE_M)
    return 10 ** (-fspl_db(carrier_hz, d) / 10)


def run_cell(sc: Scenario) -> CellMetrics:
    num = build_numerology(sc.scs, sc.n_rb)
    n_slots = sc.duration_frames * num.slots_per_frame
    slot_s = num.slot_duration
    duration_s = n_slots * slot_s
    ss = np.random.SeedSequence(sc.seed)
    place_ss, mob_ss, fade_ss, err_ss = ss.spawn(4)
    place_rng = np.random.default_rng(place_ss)
    fade_rng = np.random.default_rng(fade_ss)
    err_rng = np.random.default_rng(err_ss)

    if sc.ue_positions is not None:
        pos = np.array(sc.ue_positions, dtype=float)
    else:
        pos = uniform_disk(place_rng, sc.n_ue, sc.cell_radius_m)
    mob = sc.mobility
    if mob is not None:
        mob_rngs = [np.random.default_rng(s) for s in mob_ss.spawn(sc.n_ue)]
        states = [initial_state(mob, r, p) for r, p in zip(mob_rngs, pos)]
        slots_per_epoch = max(1, int(round(mob.epoch_duration_s / slot_s)))

    p_re = float(dbm_to_watt(sc.gnb_power_dbm)) / num.n_subcarriers
    g_link = 10 ** ((sc.gnb_gain_db + sc.ue_gain_db) / 10)
    noise = float(dbm_to_watt(noise_power_re_dbm(sc.scs, sc.noise_figure_db)))
    jam = [(s, _pdsch_jam_re_power(s, sc.n_rb) * 10 ** ((s.gain_db + sc.ue_gain_db) / 10))
           for s in sc.jammers]
    _, tap_power = tap_bins(cdl_a(sc.delay_spread_ns), num.sample_rate)

    def fades(shape):
        return wideband_gain(tap_power, fade_rng, shape) if sc.fading else np.ones(shape)

    capacities = [tb_capacity_bits(e, sc.n_rb, sc.n_data_symbols) for e in sc.mcs_table]
    logs = [UeLog() for _ in range(sc.n_ue)]
    harq: list[HarqProcess | None] = [None] * sc.n_ue
    queue = np.zeros(sc.n_ue)
    sdu_period = sc.sdu_bits / sc.app_rate_bps
    next_sdu = place_rng.random(sc.n_ue) * sdu_period
    tb_log: list[tuple[int, bool]] = []
    sinr_trace = []
    sdu_counter = 0
    rr = 0

    def large_scale():
        s = p_re * g_link * _gain(sc.carrier_hz, pos, (0.0, 0.0))
        j = np.zeros(sc.n_ue)
        for spec, pj in jam:
            if pj > 0:
                j += pj * _gain(sc.carrier_hz, pos, spec.position)
        return s, j

    sig, jam_pow = large_scale()
    for t in range(n_slots):
        if mob is not None and t > 0 and t % slots_per_epoch == 0:
            states = [steps_step(st, mob, r) for st, r in zip(states, mob_rngs)]
            pos = np.array([st.position_m for st in states])
            sig, jam_pow = large_scale()
        fade_s = fades(sc.n_ue)
        fade_j = fades((len(jam), sc.n_ue)) if jam else None
        jam_now = (np.sum([pj * _gain(sc.carrier_hz, pos, spec.position) * fade_j[i]
                           for i, (spec, pj) in enumerate(jam) if pj > 0], axis=0)
                   if any(pj > 0 for _, pj in jam) else np.zeros(sc.n_ue))
        sinr_now = 10 * np.log10(sig * fade_s / (jam_now + noise))
        csi_db = 10 * np.log10(sig / (jam_pow + noise))

        if sc.traffic is Traffic.CBR:
            now = t * slot_s
            arrived = next_sdu <= now
            while np.any(arrived):
                queue[arrived] += sc.sdu_bits
                next_sdu[arrived] += sdu_period
                arrived = next_sdu <= now
            ready = [u for u in range(sc.n_ue) if harq[u] is not None or queue[u] > 0]
        else:
            ready = list(range(sc.n_ue))
        if not ready:
            continue
        # round robin over UEs with something to send
        order = [(rr + k) % sc.n_ue for k in range(sc.n_ue)]
        u = next(v for v in order if v in ready)
        rr = (u + 1) % sc.n_ue

        proc = harq[u]
        if proc is not None:
            proc.attempts += 1
            is_retx = True
        else:
            mcs = select_mcs(float(csi_db[u]), sc.mcs_table, sc.mcs_backoff_db)
            bits = capacities[mcs]
            if sc.traffic is Traffic.CBR:
                bits = int(min(bits, queue[u]))
                queue[u] -= bits
            sdu_counter += 1
            proc = HarqProcess(sdu_counter, bits, mcs, 1, sc.harq_max_attempts)
            is_retx = False
        bler = sinr_to_bler(float(sinr_now[u]), proc.mcs, sc.mcs_table, sc.bler_slope)
        failed = err_rng.random() < bler
        tb_log.append((proc.bits, is_retx))
        lg = logs[u]
        lg.sinr_db.append(float(sinr_now[u]))
        lg.bler.append(float(bler))
        lg.tx_count += 1
        lg.retx_count += int(is_retx)
        sinr_trace.append(float(sinr_now[u]))
        if failed and proc.pending:
            harq[u] = proc
        else:
            if failed:
                lg.dropped += 1
            harq[u] = None

    throughput, goodput = account(tb_log, duration_s)
    n_tx = len(tb_log)
    retx = sum(1 for _, r in tb_log if r)
    return CellMetrics(
        throughput_bps=throughput,
        goodput_bps=goodput,
        per_ue=logs,
        mean_sinr_db=float(np.mean(sinr_trace)) if sinr_trace else float("nan"),
        retx_fraction=retx / n_tx if n_tx else 0.0,
    )


def jammers_at(n: int, template: JammerSpec | None = None,
               distance_m: float = JAMMER_DISTANCE_M) -> tuple[JammerSpec, ...]:
    """``n`` copies of ``template`` at ``distance_m`` from the gNB, distinct azimuths."""
    if n > len(JAMMER_AZIMUTHS_DEG):
        raise ValueError(f"at most {len(JAMMER_AZIMUTHS_DEG)} jammers supported")
    if template is None:
        template = JammerSpec(JammerKind.BARRAGE, 20.0)
    out = []
    for az in JAMMER_AZIMUTHS_DEG[:n]:
        a = np.deg2rad(az)
        out.append(replace(template, position=(distance_m * np.cos(a), distance_m * np.sin(a))))
    return tuple(out)


def _template(sc: Scenario) -> JammerSpec:
    return sc.jammers[0] if sc.jammers else JammerSpec(JammerKind.BARRAGE, 20.0, (JAMMER_DISTANCE_M, 0.0))


def apply_axis(sc: Scenario, axis: SweepAxis, value) -> Scenario:
    axis = SweepAxis(axis)
    if axis is SweepAxis.N_JAMMERS:
        tpl = _template(sc)
        d = float(np.hypot(*tpl.position)) or JAMMER_DISTANCE_M
        return replace(sc, jammers=jammers_at(int(value), tpl, d))
    jammers = sc.jammers or (_template(sc),)
    if axis is SweepAxis.JAM_POWER:
        return replace(sc, jammers=tuple(replace(j, tx_power_dbm=float(value)) for j in jammers))
    moved = []
    for j in jammers:
        az = np.arctan2(j.position[1], j.position[0])
        moved.append(replace(j, position=(float(value) * np.cos(az), float(value) * np.sin(az))))
    return replace(sc, jammers=tuple(moved))


def _run_point(args) -> dict:
    sc, axis, value, seed = args
    m = run_cell(replace(apply_axis(sc, axis, value), seed=int(seed)))
    return {
        "axis_value": value,
        "seed": int(seed),
        "throughput_bps": m.throughput_bps,
        "goodput_bps": m.goodput_bps,
        "mean_sinr_db": m.mean_sinr_db,
        "retx_fraction": m.retx_fraction,
    }


def sweep(sc: Scenario, axis: SweepAxis, values, seeds=None, workers: int = 1) -> list[dict]:
    """One run per (value, seed); rows sorted by (value, seed).

    Every sweep point reuses the same seeds so points differ only in the
    swept parameter.
    """
    axis = SweepAxis(axis)
    seeds = [sc.seed] if seeds is None else list(seeds)
    jobs = [(sc, axis, v, s) for v in values for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_run_point, jobs))
    else:
        rows = [_run_point(j) for j in jobs]
    log.debug("sweep %s: %d runs", axis.value, len(rows))
    return sorted(rows, key=lambda r: (r["axis_value"], r["seed"]))


def summarize(rows: list[dict]) -> list[dict]:
    """Mean and standard deviation per axis value."""
    out = []
    for v in sorted({r["axis_value"] for r in rows}):
        pts = [r for r in rows if r["axis_value"] == v]
        agg = {"axis_value": v, "n": len(pts)}
        for key in ("throughput_bps", "goodput_bps", "mean_sinr_db", "retx_fraction"):
            vals = np.array([p[key] for p in pts])
            agg[f"{key}_mean"] = float(vals.mean())
            agg[f"{key}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        out.append(agg)
    return out
