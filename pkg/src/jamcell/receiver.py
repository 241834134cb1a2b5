"""Cell-search receiver: PSS/SSS detection, DM-RS SJNR, PBCH/PDSCH EVM, BLER proxy."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.ndimage import uniform_filter1d

from .ssb import (SEQ_LEN, SSB_SUBCARRIERS, SSB_SYMBOLS, SYNC_FIRST_SC, DEFAULT_MIB,
                  CellIdentity, _as_cell, pbch_dmrs, pbch_payload, pss_sequence, re_masks,
                  re_positions, sss_sequence, ssb_subcarrier_offset)
from .waveform import NumerologyConfig, ResourceGrid, measure_evm_rms, ofdm_demodulate

DEFAULT_PSS_THRESHOLD = 8.0
DEFAULT_EVM_DECODE_THRESHOLD = 35.0
SJNR_CEILING_DB = 60.0
SJNR_FLOOR_DB = -30.0
# longest channel the DM-RS fit can represent, in samples
DMRS_FIT_DELAYS = 16
PSS_SMOOTHING = 13


@dataclass(frozen=True)
class PssDetection:
    n_id_2: int
    timing_offset: int
    peak_metric: float
    detected: bool


@dataclass(frozen=True)
class SsbMeasurement:
    pci_detected: CellIdentity | None
    dmrs_sjnr_db: tuple[float, ...]
    pbch_evm_rms: float
    pss_evm_rms: float
    mib_decodable: bool


@lru_cache(maxsize=8)
def pss_replicas(numerology: NumerologyConfig) -> np.ndarray:
    """Time-domain PSS symbols without CP, shape (3, fft_size)."""
    bins = numerology.fft_bins()
    k0 = ssb_subcarrier_offset(numerology.n_subcarriers) + SYNC_FIRST_SC
    out = np.zeros((3, numerology.fft_size), dtype=complex)
    for n2 in range(3):
        freq = np.zeros(numerology.fft_size, dtype=complex)
        freq[bins[k0:k0 + SEQ_LEN]] = pss_sequence(n2)
        out[n2] = np.fft.ifft(freq, norm="ortho")
    out.setflags(write=False)
    return out


def _pss_band(numerology: NumerologyConfig, length: int) -> np.ndarray:
    k0 = ssb_subcarrier_offset(numerology.n_subcarriers) + SYNC_FIRST_SC
    rel = np.arange(k0, k0 + SEQ_LEN) - numerology.n_subcarriers // 2
    lo, hi = (rel[0] - 0.5) * numerology.scs, (rel[-1] + 0.5) * numerology.scs
    f = np.fft.fftfreq(length, 1 / numerology.sample_rate)
    return (f >= lo) & (f <= hi)


def pss_correlation(samples, numerology: NumerologyConfig) -> np.ndarray:
    """Normalized in-band correlation magnitude, shape (3, n_lags).

    The capture is first restricted to the PSS bandwidth; each lag's
    correlation is divided by the replica and window energies so the metric
    lies in [0, 1] whatever the absolute power.
    """
    x = np.asarray(samples, dtype=complex)
    n = numerology.fft_size
    if x.size < n:
        raise ValueError(f"capture of {x.size} samples is shorter than one PSS replica ({n})")
    spec = np.fft.fft(x)
    spec[~_pss_band(numerology, x.size)] = 0
    y = np.fft.ifft(spec)
    n_lags = x.size - n + 1
    power = np.concatenate(([0.0], np.cumsum(np.abs(y) ** 2)))
    window = power[n:n + n_lags] - power[:n_lags]
    window = np.maximum(window, 0.0)
    replicas = pss_replicas(numerology)
    ref_energy = np.sum(np.abs(replicas[0]) ** 2)
    valid = window > 1e-12 * max(window.max(), 1e-300)
    out = np.zeros((3, n_lags))
    for n2 in range(3):
        r = np.zeros(x.size, dtype=complex)
        r[:n] = replicas[n2]
        c = np.fft.ifft(spec * np.conj(np.fft.fft(r)))[:n_lags]
        out[n2, valid] = np.abs(c[valid]) / np.sqrt(ref_energy * window[valid])
    return out


def detect_pss(samples, numerology: NumerologyConfig,
               threshold: float = DEFAULT_PSS_THRESHOLD) -> PssDetection:
    """Search all three PSS hypotheses over every lag.

    ``timing_offset`` is the first sample of the PSS FFT window (after its CP).
    """
    corr = pss_correlation(samples, numerology)
    n2, lag = np.unravel_index(int(np.argmax(corr)), corr.shape)
    peak = float(corr[n2, lag])
    floor = float(np.median(corr))
    if floor > 0:
        metric = peak / floor
    else:
        metric = float("inf") if peak > 0 else 0.0
    return PssDetection(int(n2), int(lag), metric, bool(metric >= threshold))


def ssb_block(grid: ResourceGrid, start_symbol: int) -> np.ndarray:
    if start_symbol is None or start_symbol < 0 or start_symbol + SSB_SYMBOLS > grid.n_symbols:
        raise ValueError(f"SSB position {start_symbol} is outside the {grid.n_symbols}-symbol grid")
    k0 = ssb_subcarrier_offset(grid.data.shape[0])
    return grid.data[k0:k0 + SSB_SUBCARRIERS, start_symbol:start_symbol + SSB_SYMBOLS]


def _pss_channel(block: np.ndarray, n_id_2: int) -> np.ndarray:
    h = block[SYNC_FIRST_SC:SYNC_FIRST_SC + SEQ_LEN, 0] * pss_sequence(n_id_2)
    return (uniform_filter1d(h.real, PSS_SMOOTHING, mode="nearest")
            + 1j * uniform_filter1d(h.imag, PSS_SMOOTHING, mode="nearest"))


def detect_sss(grid: ResourceGrid, n_id_2: int, ssb_position: int) -> tuple[int, np.ndarray]:
    """Identify N_ID^(1) by correlating PSS-compensated SSS REs against all 336 candidates."""
    block = ssb_block(grid, ssb_position)
    h = _pss_channel(block, n_id_2)
    z = block[SYNC_FIRST_SC:SYNC_FIRST_SC + SEQ_LEN, 2] * np.conj(h)
    cands = _sss_bank(n_id_2)
    energy = np.sqrt(np.sum(np.abs(z) ** 2) * SEQ_LEN)
    scores = np.abs(cands @ z) / energy if energy > 0 else np.zeros(336)
    return int(np.argmax(scores)), scores


@lru_cache(maxsize=3)
def _sss_bank(n_id_2: int) -> np.ndarray:
    bank = np.stack([sss_sequence(n1, n_id_2) for n1 in range(336)])
    bank.setflags(write=False)
    return bank


def search_cell(samples, numerology: NumerologyConfig,
                threshold: float = DEFAULT_PSS_THRESHOLD) -> tuple[PssDetection, CellIdentity | None]:
    """PSS timing and N_ID^(2), then SSS for N_ID^(1) on the PSS-aligned SSB."""
    pss = detect_pss(samples, numerology, threshold)
    if not pss.detected:
        return pss, None
    cp = numerology.cp_lengths[1]
    start = pss.timing_offset - cp
    try:
        # SSB symbols always carry the normal CP, which slot symbol 1 has too
        grid = ofdm_demodulate(samples, numerology, start, SSB_SYMBOLS, first_symbol=1)
    except ValueError:
        return pss, None
    # SSB grid built from 4 symbols: embed at symbol 0
    n1, _ = detect_sss(grid, pss.n_id_2, 0)
    return pss, CellIdentity(n1, pss.n_id_2)


def dmrs_ls(block: np.ndarray, pci, ssb_index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """LS channel estimates on the DM-RS REs: (subcarriers, symbols, h)."""
    kk, ll = re_positions(re_masks(pci)["dmrs"])
    return kk, ll, block[kk, ll] / pbch_dmrs(pci, ssb_index)


def estimate_dmrs_sjnr(grid: ResourceGrid, pci, ssb_index: int, start_symbol: int) -> float:
    """SJNR (dB) of one burst from its 144 DM-RS REs.

    The LS estimates are projected onto channels of at most
    ``DMRS_FIT_DELAYS`` samples of delay spread; the projection is the
    signal estimate and the residual the jamming-plus-noise estimate, both
    corrected for the fitted degrees of freedom.
    """
    cell = _as_cell(pci)
    block = ssb_block(grid, start_symbol)
    kk, _, h = dmrs_ls(block, cell, ssb_index)
    n_fft = grid.numerology.fft_size
    basis = np.exp(-2j * np.pi * np.outer(kk, np.arange(DMRS_FIT_DELAYS)) / n_fft)
    coef, _, rank, _ = np.linalg.lstsq(basis, h, rcond=1e-6)
    fit = basis @ coef
    n = h.size
    noise = np.sum(np.abs(h - fit) ** 2) / (n - rank)
    signal = (np.sum(np.abs(fit) ** 2) - rank * noise) / n
    if noise <= 0:
        return SJNR_CEILING_DB
    if signal <= 0:
        return SJNR_FLOOR_DB
    return float(np.clip(10 * np.log10(signal / noise), SJNR_FLOOR_DB, SJNR_CEILING_DB))


def estimate_ssb_channel(grid: ResourceGrid, pci, ssb_index: int, start_symbol: int) -> np.ndarray:
    """Per-subcarrier channel over the SSB: DM-RS LS averaged across symbols,
    linearly interpolated in frequency."""
    block = ssb_block(grid, start_symbol)
    kk, _, h = dmrs_ls(block, pci, ssb_index)
    keys, inv = np.unique(kk, return_inverse=True)
    sums = np.zeros(keys.size, dtype=complex)
    np.add.at(sums, inv, h)
    mean = sums / np.bincount(inv)
    k = np.arange(SSB_SUBCARRIERS)
    return np.interp(k, keys, mean.real) + 1j * np.interp(k, keys, mean.imag)


def _zf(y: np.ndarray, h: np.ndarray) -> np.ndarray:
    safe = np.where(np.abs(h) > 0, h, 1.0)
    return np.where(np.abs(h) > 0, y / safe, 0.0)


def equalize_pbch(grid: ResourceGrid, pci, ssb_index: int, start_symbol: int,
                  channel_estimate=None) -> np.ndarray:
    block = ssb_block(grid, start_symbol)
    if channel_estimate is None:
        channel_estimate = estimate_ssb_channel(grid, pci, ssb_index, start_symbol)
    kk, ll = re_positions(re_masks(pci)["pbch"])
    return _zf(block[kk, ll], np.asarray(channel_estimate)[kk])


def decode_pbch(grid: ResourceGrid, pci, ssb_index: int, start_symbol: int,
                channel_estimate=None, mib_bits=DEFAULT_MIB,
                evm_threshold: float = DEFAULT_EVM_DECODE_THRESHOLD) -> tuple[float, bool]:
    """Equalized PBCH EVM (percent) and whether the MIB counts as decodable."""
    eq = equalize_pbch(grid, pci, ssb_index, start_symbol, channel_estimate)
    evm = measure_evm_rms(eq, pbch_payload(pci, mib_bits))
    return evm, mib_decodable(evm, evm_threshold)


def mib_decodable(evm_rms: float, evm_threshold: float = DEFAULT_EVM_DECODE_THRESHOLD) -> bool:
    return bool(evm_rms <= evm_threshold)


def equalize_pss(grid: ResourceGrid, n_id_2: int, start_symbol: int) -> np.ndarray:
    block = ssb_block(grid, start_symbol)
    y = block[SYNC_FIRST_SC:SYNC_FIRST_SC + SEQ_LEN, 0]
    return _zf(y, _pss_channel(block, n_id_2))


def pss_evm(grid: ResourceGrid, n_id_2: int, start_symbol: int) -> float:
    """PSS EVM after equalizing with the smoothed PSS-derived channel."""
    return measure_evm_rms(equalize_pss(grid, n_id_2, start_symbol), pss_sequence(n_id_2))


def estimate_pdsch_channel(grid: ResourceGrid, dmrs_mask: np.ndarray, dmrs_ref: np.ndarray,
                           slot_symbols: int = 14) -> np.ndarray:
    """LS on PDSCH DM-RS, linear interpolation across subcarriers, held over each slot."""
    est = np.zeros(grid.data.shape, dtype=complex)
    k = np.arange(grid.data.shape[0])
    for s0 in range(0, grid.n_symbols, slot_symbols):
        sl = slice(s0, min(s0 + slot_symbols, grid.n_symbols))
        m = dmrs_mask[:, sl]
        kk, ll = np.nonzero(m)
        if kk.size == 0:
            continue
        h = grid.data[:, sl][kk, ll] / dmrs_ref[:, sl][kk, ll]
        keys, inv = np.unique(kk, return_inverse=True)
        sums = np.zeros(keys.size, dtype=complex)
        np.add.at(sums, inv, h)
        mean = sums / np.bincount(inv)
        hk = np.interp(k, keys, mean.real) + 1j * np.interp(k, keys, mean.imag)
        est[:, sl] = hk[:, None]
    return est


def pdsch_evm(grid: ResourceGrid, reference: np.ndarray, data_mask: np.ndarray,
              channel_estimate: np.ndarray) -> float:
    """ZF-equalized EVM over the PDSCH data REs selected by ``data_mask``."""
    eq = _zf(grid.data[data_mask], channel_estimate[data_mask])
    return measure_evm_rms(eq, reference[data_mask])


@dataclass(frozen=True)
class McsEntry:
    name: str
    modulation: str
    code_rate: float
    threshold_db: float

    def __post_init__(self):
        if self.modulation not in ("QPSK", "16QAM", "64QAM"):
            raise ValueError(f"unsupported modulation {self.modulation!r}")
        if not 0 < self.code_rate <= 1:
            raise ValueError("code rate must be in (0, 1]")

    @property
    def bits_per_symbol(self) -> int:
        return {"QPSK": 2, "16QAM": 4, "64QAM": 6}[self.modulation]


DEFAULT_MCS_TABLE = (
    McsEntry("qpsk-1/2", "QPSK", 0.5, 0.0),
    McsEntry("16qam-1/2", "16QAM", 0.5, 10.0),
    McsEntry("64qam-3/4", "64QAM", 0.75, 18.0),
)
DEFAULT_BLER_SLOPE = 2.0


def sinr_to_bler(sinr_db, mcs, table=DEFAULT_MCS_TABLE, slope: float = DEFAULT_BLER_SLOPE):
    """Logistic block-error proxy 1 / (1 + exp(slope * (sinr - threshold)))."""
    if isinstance(mcs, McsEntry):
        entry = mcs
    else:
        try:
            entry = table[mcs] if isinstance(mcs, (int, np.integer)) else next(
                e for e in table if e.name == mcs)
        except (IndexError, StopIteration):
            raise ValueError(f"unknown MCS {mcs!r}") from None
    x = slope * (np.asarray(sinr_db, dtype=float) - entry.threshold_db)
    # expit form avoids overflow for large |x|
    bler = np.exp(-np.logaddexp(0.0, x))
    return float(bler) if bler.ndim == 0 else bler


def measure_ssb(grid: ResourceGrid, burst_starts, pci, *, detected: CellIdentity | None = None,
                mib_bits=DEFAULT_MIB,
                evm_threshold: float = DEFAULT_EVM_DECODE_THRESHOLD) -> SsbMeasurement:
    """Per-burst DM-RS SJNR plus PBCH and PSS EVM pooled over all bursts."""
    cell = _as_cell(pci)
    sjnr, pbch_eq, pss_eq = [], [], []
    for idx, start in enumerate(burst_starts):
        sjnr.append(estimate_dmrs_sjnr(grid, cell, idx, start))
        pbch_eq.append(equalize_pbch(grid, cell, idx, start))
        pss_eq.append(equalize_pss(grid, cell.n_id_2, start))
    ref = np.tile(pbch_payload(cell, mib_bits), len(pbch_eq))
    pbch = measure_evm_rms(np.concatenate(pbch_eq), ref)
    pss = measure_evm_rms(np.concatenate(pss_eq), np.tile(pss_sequence(cell.n_id_2), len(pss_eq)))
    return SsbMeasurement(detected, tuple(sjnr), pbch, pss, mib_decodable(pbch, evm_threshold))
