"""Single-link SSB attack pipeline: gNB -> UE downlink with jammers, then cell search.

The capture spans the SSB half-frame by default (all bursts of the
20 ms period fall inside its first 5 ms). The gNB spreads its power evenly
over all 12*n_rb subcarriers; REs outside the SSBs carry PDSCH data with a
comb DM-RS on the first symbol of each slot.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import (ChannelRealization, apply_channel, cdl_a, dbm_to_watt, noise_power_re_dbm,
                      realize_fading)
from .jammer import JammerSpec, distance, link_gain_db, synthesize_jam_waveform
from .receiver import (DEFAULT_EVM_DECODE_THRESHOLD, DEFAULT_PSS_THRESHOLD, PssDetection,
                       SsbMeasurement, decode_pbch, detect_pss, detect_sss, equalize_pbch,
                       estimate_pdsch_channel, measure_ssb, pdsch_evm, pss_correlation,
                       search_cell)
from .ssb import DEFAULT_MIB, CellIdentity, SsbBurstSet, place_burst_set, schedule_burst_set, ssb_occupancy
from .waveform import (ModScheme, NumerologyConfig, ResourceGrid, build_numerology, modulate,
                       ofdm_demodulate, ofdm_modulate)

PDSCH_DMRS_SYMBOL = 0


@dataclass(frozen=True)
class LinkScenario:
    scs: float = 30e3
    n_rb: int = 51
    carrier_hz: float = 2.635e9
    gnb_position: tuple[float, float] = (0.0, 0.0)
    ue_position: tuple[float, float] = (60.0, 60.0)
    gnb_power_dbm: float = 32.0
    gnb_gain_db: float = 0.0
    ue_gain_db: float = 0.0
    noise_figure_db: float = 7.0
    pci: int = 350
    n_bursts: int = 8
    boost_index: int = 2
    boost_db: float = 0.0
    jammers: tuple[JammerSpec, ...] = ()
    fading: bool = True
    delay_spread_ns: float = 30.0
    pdsch_modulation: str = "16QAM"
    capture_ms: float = 5.0
    pss_threshold: float = DEFAULT_PSS_THRESHOLD
    evm_threshold: float = DEFAULT_EVM_DECODE_THRESHOLD
    mib_bits: tuple[int, ...] = DEFAULT_MIB

    @property
    def numerology(self) -> NumerologyConfig:
        return build_numerology(self.scs, self.n_rb)

    @property
    def n_symbols(self) -> int:
        num = self.numerology
        slots = int(round(self.capture_ms * 1e-3 / num.slot_duration))
        return max(slots, 1) * num.symbols_per_slot

    @property
    def signal_re_power_w(self) -> float:
        """Received per-RE signal power without fading or beam gain."""
        p_re = float(dbm_to_watt(self.gnb_power_dbm)) / (12 * self.n_rb)
        d = distance(self.gnb_position, self.ue_position)
        return p_re * 10 ** (link_gain_db(self.gnb_gain_db, self.ue_gain_db, self.carrier_hz, d) / 10)

    @property
    def noise_re_power_w(self) -> float:
        return float(dbm_to_watt(noise_power_re_dbm(self.scs, self.noise_figure_db)))


@dataclass
class LinkCapture:
    scenario: LinkScenario
    numerology: NumerologyConfig
    burst_set: SsbBurstSet
    samples: np.ndarray
    tx_grid: ResourceGrid
    pdsch_mask: np.ndarray
    dmrs_mask: np.ndarray

    @property
    def pss_positions(self) -> np.ndarray:
        """First sample of every burst's PSS FFT window."""
        num = self.numerology
        n = self.tx_grid.n_symbols
        starts = num.symbol_starts(n)
        out = [starts[s] + num.cp_length(s) for s in self.burst_set.start_symbols if s < n]
        return np.asarray(out)


def _fade(x: np.ndarray, num: NumerologyConfig, profile, rng, gain_db: float) -> np.ndarray:
    """Quasi-static fading: a fresh realization for each slot. ``profile=None``
    means a static unit channel."""
    if profile is None:
        return apply_channel(x, ChannelRealization.identity(), gain_db)
    slot = num.slot_samples
    out = np.empty_like(x)
    for s0 in range(0, x.size, slot):
        ch = realize_fading(profile, num, rng=rng)
        lead = min(s0, ch.taps.size - 1)
        seg = x[s0 - lead:s0 + slot]
        out[s0:s0 + slot] = apply_channel(seg, ch, gain_db)[lead:]
    return out


def build_tx_grid(sc: LinkScenario, num: NumerologyConfig, burst_set: SsbBurstSet,
                  rng: np.random.Generator):
    n_sym = sc.n_symbols
    n_sc = num.n_subcarriers
    occupied = ssb_occupancy(n_sc, n_sym, burst_set)
    dmrs = np.zeros((n_sc, n_sym), dtype=bool)
    dmrs[0::2, PDSCH_DMRS_SYMBOL::num.symbols_per_slot] = True
    dmrs &= ~occupied
    pdsch = ~occupied & ~dmrs
    data = np.zeros((n_sc, n_sym), dtype=complex)
    scheme = ModScheme.from_name(sc.pdsch_modulation)
    n_data = int(pdsch.sum())
    data[pdsch] = modulate(rng.integers(0, 2, n_data * scheme.bits_per_symbol), scheme)
    data[dmrs] = modulate(rng.integers(0, 2, 2 * int(dmrs.sum())), ModScheme.QPSK)
    grid = place_burst_set(ResourceGrid(data, num), burst_set)
    return grid, pdsch, dmrs


def simulate_link(sc: LinkScenario, seed) -> LinkCapture:
    """Generate the received baseband capture for one seed."""
    num = sc.numerology
    streams = np.random.SeedSequence(seed).spawn(3 + len(sc.jammers))
    data_rng, fade_rng, noise_rng = (np.random.default_rng(s) for s in streams[:3])
    burst_set = schedule_burst_set(sc.pci, sc.n_bursts, sc.boost_index, sc.boost_db, sc.scs,
                                   sc.mib_bits)
    grid, pdsch, dmrs = build_tx_grid(sc, num, burst_set, data_rng)
    p_re = float(dbm_to_watt(sc.gnb_power_dbm)) / num.n_subcarriers
    x = ofdm_modulate(grid) * np.sqrt(p_re)
    profile = cdl_a(sc.delay_spread_ns) if sc.fading else None
    d = distance(sc.gnb_position, sc.ue_position)
    rx = _fade(x, num, profile, fade_rng,
               link_gain_db(sc.gnb_gain_db, sc.ue_gain_db, sc.carrier_hz, d))
    for spec, ss in zip(sc.jammers, streams[3:]):
        j_rng, jf_rng = (np.random.default_rng(s) for s in ss.spawn(2))
        j = synthesize_jam_waveform(spec, num, burst_set, n_symbols=sc.n_symbols, rng=j_rng)
        dj = distance(spec.position, sc.ue_position)
        if dj == 0:
            raise ValueError("UE coincides with a jammer")
        rx = rx + _fade(j, num, profile, jf_rng,
                        link_gain_db(spec.gain_db, sc.ue_gain_db, sc.carrier_hz, dj))
    sigma = np.sqrt(sc.noise_re_power_w / 2)
    rx = rx + sigma * (noise_rng.standard_normal(rx.size) + 1j * noise_rng.standard_normal(rx.size))
    return LinkCapture(sc, num, burst_set, rx, grid, pdsch, dmrs)


def pss_acquired(capture: LinkCapture, det: PssDetection) -> bool:
    """Detected with the right N_ID^(2) and timing within a CP of some burst."""
    if not det.detected or det.n_id_2 != capture.burst_set.pci.n_id_2:
        return False
    tol = capture.numerology.cp_lengths[1]
    return bool(np.min(np.abs(capture.pss_positions - det.timing_offset)) <= tol)


@dataclass
class LinkResult:
    pss: PssDetection
    pss_acquired: bool
    pci_detected: CellIdentity | None
    ssb: SsbMeasurement
    pbch_evm_per_burst: tuple[float, ...]
    pdsch_evm: float
    sss_scores: np.ndarray
    correlation: np.ndarray = field(repr=False)
    pbch_constellation: dict = field(repr=False, default_factory=dict)
    pdsch_constellation: np.ndarray = field(repr=False, default=None)
    rx_grid: ResourceGrid = field(repr=False, default=None)


def measure_link(capture: LinkCapture) -> LinkResult:
    sc = capture.scenario
    num = capture.numerology
    pss, cell = search_cell(capture.samples, num, sc.pss_threshold)
    # measurements below use the known frame timing
    grid = ofdm_demodulate(capture.samples, num, 0, capture.tx_grid.n_symbols)
    true_cell = capture.burst_set.pci
    starts = [s for s in capture.burst_set.start_symbols if s + 4 <= grid.n_symbols]
    ssb = measure_ssb(grid, starts, true_cell, detected=cell, mib_bits=sc.mib_bits,
                      evm_threshold=sc.evm_threshold)
    per_burst = []
    constellations = {}
    for idx, s in enumerate(starts):
        evm, _ = decode_pbch(grid, true_cell, idx, s, mib_bits=sc.mib_bits)
        per_burst.append(evm)
        constellations[idx] = equalize_pbch(grid, true_cell, idx, s)
    est = estimate_pdsch_channel(grid, capture.dmrs_mask, capture.tx_grid.data, num.symbols_per_slot)
    evm_pdsch = pdsch_evm(grid, capture.tx_grid.data, capture.pdsch_mask, est)
    safe = np.where(np.abs(est) > 0, est, 1.0)
    pdsch_eq = np.where(np.abs(est) > 0, grid.data / safe, 0)[capture.pdsch_mask]
    _, scores = detect_sss(grid, true_cell.n_id_2, starts[0])
    return LinkResult(
        pss=pss,
        pss_acquired=pss_acquired(capture, pss),
        pci_detected=cell,
        ssb=ssb,
        pbch_evm_per_burst=tuple(per_burst),
        pdsch_evm=evm_pdsch,
        sss_scores=scores,
        correlation=pss_correlation(capture.samples, num),
        pbch_constellation=constellations,
        pdsch_constellation=pdsch_eq,
        rx_grid=grid,
    )


def pss_trial(sc: LinkScenario, seed) -> bool:
    """One cell-search attempt; True when PSS is acquired correctly."""
    cap = simulate_link(sc, seed)
    return pss_acquired(cap, detect_pss(cap.samples, cap.numerology, sc.pss_threshold))


def detection_rate(sc: LinkScenario, seeds) -> float:
    seeds = list(seeds)
    return sum(pss_trial(sc, s) for s in seeds) / len(seeds)
