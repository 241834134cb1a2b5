"""Jammer power arithmetic, waveform synthesis and multi-jammer aggregation.

Power conventions: a grid RE value ``X`` carries ``|X|^2`` watts per RE, and
the total power of a waveform is the sum of its per-RE powers over one
OFDM symbol (averaged over the symbols in which it transmits).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .channel import dbm_to_watt, fspl_db, watt_to_dbm
from .ssb import SSB_SUBCARRIERS, SSB_SYMBOLS, SsbBurstSet, re_masks, ssb_subcarrier_offset
from .waveform import SUBCARRIERS_PER_RB, NumerologyConfig, ResourceGrid, ofdm_modulate

MIN_POWER_DBM = -60.0
MAX_POWER_DBM = 90.0


class JammerKind(enum.Enum):
    BARRAGE = "barrage"
    SMART_SSB = "smart_ssb"
    SMART_PBCH = "smart_pbch"

    @property
    def is_smart(self) -> bool:
        return self is not JammerKind.BARRAGE


@dataclass(frozen=True)
class JammerSpec:
    kind: JammerKind
    tx_power_dbm: float
    position: tuple[float, float] = (0.0, 0.0)
    gain_db: float = 0.0

    def __post_init__(self):
        if not isinstance(self.kind, JammerKind):
            object.__setattr__(self, "kind", JammerKind(self.kind))
        if not MIN_POWER_DBM <= self.tx_power_dbm <= MAX_POWER_DBM:
            raise ValueError(
                f"jammer power {self.tx_power_dbm} dBm outside [{MIN_POWER_DBM}, {MAX_POWER_DBM}]")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))


@dataclass(frozen=True)
class JamFootprint:
    re_power: np.ndarray
    total_rx_power_dbm: float

    @property
    def re_power_dbm(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return watt_to_dbm(self.re_power)


def sjnr(p_re_rx: float, p_j_re: float, p_n_re: float) -> float:
    """Signal-to-jamming-plus-noise ratio per RE (linear)."""
    if p_n_re <= 0:
        raise ValueError(f"noise power must be positive, got {p_n_re}")
    if p_re_rx < 0 or p_j_re < 0:
        raise ValueError("signal and jamming powers must be non-negative")
    return p_re_rx / (p_j_re + p_n_re)


def min_jam_re_power(p_re_rx: float, gamma_th: float, p_n_re: float) -> float:
    """Smallest per-RE jamming power that pulls the SJNR down to ``gamma_th``.

    Clamped at zero when noise alone already keeps the link below threshold.
    """
    if gamma_th <= 0:
        raise ValueError(f"gamma_th must be positive, got {gamma_th}")
    return max(p_re_rx / gamma_th - p_n_re, 0.0)


def total_jam_power(kind: JammerKind, n_rb: int, n_rb_ssb: int, p_min_re: float) -> float:
    if p_min_re < 0:
        raise ValueError("per-RE power must be non-negative")
    kind = JammerKind(kind)
    width = n_rb if kind is JammerKind.BARRAGE else n_rb_ssb
    return SUBCARRIERS_PER_RB * width * p_min_re


def burst_symbols(burst_set: SsbBurstSet, n_symbols: int, numerology: NumerologyConfig) -> list[int]:
    """Absolute first symbols of every burst inside ``n_symbols``, repeating each period."""
    period = int(round(burst_set.periodicity_ms / (numerology.slot_duration * 1e3)))
    period *= numerology.symbols_per_slot
    starts = []
    for offset in range(0, n_symbols, period):
        starts.extend(offset + s for s in burst_set.start_symbols if offset + s < n_symbols)
    return starts


def target_mask(kind: JammerKind, numerology: NumerologyConfig, n_symbols: int,
                burst_set: SsbBurstSet | None = None) -> np.ndarray:
    """Boolean (subcarrier x symbol) mask of the REs a jammer kind transmits on."""
    kind = JammerKind(kind)
    n_sc = numerology.n_subcarriers
    if kind is JammerKind.BARRAGE:
        return np.ones((n_sc, n_symbols), dtype=bool)
    if burst_set is None:
        raise ValueError(f"{kind.name} jammer needs an SSB burst schedule")
    if kind is JammerKind.SMART_SSB:
        block = np.ones((SSB_SUBCARRIERS, SSB_SYMBOLS), dtype=bool)
    else:
        block = re_masks(burst_set.pci)["pbch_region"]
    mask = np.zeros((n_sc, n_symbols), dtype=bool)
    k0 = ssb_subcarrier_offset(n_sc)
    for s in burst_symbols(burst_set, n_symbols, numerology):
        stop = min(s + SSB_SYMBOLS, n_symbols)
        mask[k0:k0 + SSB_SUBCARRIERS, s:stop] = block[:, :stop - s]
    return mask


def per_re_power(total_w: float, mask: np.ndarray) -> float:
    """Per-RE power such that the mean per-symbol total over ON symbols is ``total_w``."""
    active = np.count_nonzero(mask)
    if active == 0:
        return 0.0
    on_symbols = np.count_nonzero(mask.any(axis=0))
    return total_w * on_symbols / active


def n_symbols_for(duration_s: float, numerology: NumerologyConfig) -> int:
    slots = int(round(duration_s / numerology.slot_duration))
    if slots < 1:
        raise ValueError(f"duration {duration_s} s is shorter than one slot")
    return slots * numerology.symbols_per_slot


def jam_grid(spec: JammerSpec, numerology: NumerologyConfig, burst_set: SsbBurstSet | None,
             n_symbols: int, rng: np.random.Generator) -> ResourceGrid:
    mask = target_mask(spec.kind, numerology, n_symbols, burst_set)
    p_re = per_re_power(float(dbm_to_watt(spec.tx_power_dbm)), mask)
    n = np.count_nonzero(mask)
    data = np.zeros(mask.shape, dtype=complex)
    data[mask] = np.sqrt(p_re / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return ResourceGrid(data, numerology)


def synthesize_jam_waveform(spec: JammerSpec, numerology: NumerologyConfig,
                            burst_set: SsbBurstSet | None, duration_s: float | None = None,
                            seed=None, *, n_symbols: int | None = None,
                            rng: np.random.Generator | None = None) -> np.ndarray:
    """Complex Gaussian jamming waveform restricted to the kind's target REs."""
    if n_symbols is None:
        if duration_s is None:
            raise ValueError("give duration_s or n_symbols")
        n_symbols = n_symbols_for(duration_s, numerology)
    if rng is None:
        rng = np.random.default_rng(seed)
    return ofdm_modulate(jam_grid(spec, numerology, burst_set, n_symbols, rng))


def link_gain_db(tx_gain_db: float, rx_gain_db: float, carrier_hz: float, distance_m: float) -> float:
    return tx_gain_db + rx_gain_db - fspl_db(carrier_hz, distance_m)


def distance(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def aggregate_jammers(specs, ue_position, numerology: NumerologyConfig,
                      burst_set: SsbBurstSet | None = None, *, n_symbols: int | None = None,
                      carrier_hz: float = 2.635e9, rx_gain_db: float = 0.0) -> JamFootprint:
    """Per-RE jamming power at the UE, summed over jammers in the linear domain."""
    if n_symbols is None:
        n_symbols = numerology.symbols_per_slot * numerology.slots_per_frame * 2
    total = np.zeros((numerology.n_subcarriers, n_symbols))
    rx_total = 0.0
    for spec in specs:
        d = distance(spec.position, ue_position)
        if d == 0:
            raise ValueError(f"UE at {tuple(ue_position)} coincides with jammer at {spec.position}")
        gain = 10 ** (link_gain_db(spec.gain_db, rx_gain_db, carrier_hz, d) / 10)
        mask = target_mask(spec.kind, numerology, n_symbols, burst_set)
        p_tx = float(dbm_to_watt(spec.tx_power_dbm))
        total[mask] += per_re_power(p_tx, mask) * gain
        rx_total += p_tx * gain
    with np.errstate(divide="ignore"):
        rx_dbm = float(watt_to_dbm(rx_total)) if rx_total > 0 else float("-inf")
    return JamFootprint(total, rx_dbm)
