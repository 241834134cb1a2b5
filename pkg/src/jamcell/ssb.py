"""Synchronization signal block generation and burst-set scheduling.

Sequence construction follows TS 38.211 sections 7.4.2 and 7.4.1.4. PBCH
polar coding is not modeled: the payload is the MIB stand-in repeated to
fill the PBCH REs, scrambled and QPSK mapped.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .waveform import ModScheme, ResourceGrid, modulate

SSB_SUBCARRIERS = 240
SSB_SYMBOLS = 4
SEQ_LEN = 127
SYNC_FIRST_SC = 56  # PSS/SSS occupy subcarriers 56..182
N_DMRS = 144
N_PBCH_DATA = 432
MIB_BITS = 24
DEFAULT_MIB = tuple(int(b) for b in format(0xA5C3E1, "024b"))
SSB_PERIOD_MS = 20.0


@dataclass(frozen=True)
class CellIdentity:
    n_id_1: int
    n_id_2: int

    def __post_init__(self):
        if not 0 <= self.n_id_1 <= 335:
            raise ValueError(f"n_id_1={self.n_id_1} outside 0..335")
        if not 0 <= self.n_id_2 <= 2:
            raise ValueError(f"n_id_2={self.n_id_2} outside 0..2")

    @property
    def pci(self) -> int:
        return 3 * self.n_id_1 + self.n_id_2

    @classmethod
    def from_pci(cls, pci: int) -> "CellIdentity":
        if not 0 <= pci <= 1007:
            raise ValueError(f"pci={pci} outside 0..1007")
        return cls(pci // 3, pci % 3)


def _as_cell(pci) -> CellIdentity:
    return pci if isinstance(pci, CellIdentity) else CellIdentity.from_pci(int(pci))


def _m_sequence(taps: tuple[int, ...], init: tuple[int, ...]) -> np.ndarray:
    x = np.zeros(SEQ_LEN, dtype=np.int8)
    x[:7] = init
    for i in range(SEQ_LEN - 7):
        x[i + 7] = sum(x[i + t] for t in taps) % 2
    return x


# x(i+7) = x(i+4) + x(i) with x(6..0) = 1110110 for PSS, x(0) = 1 for SSS
_PSS_X = _m_sequence((4, 0), (0, 1, 1, 0, 1, 1, 1))
_SSS_X0 = _m_sequence((4, 0), (1, 0, 0, 0, 0, 0, 0))
_SSS_X1 = _m_sequence((1, 0), (1, 0, 0, 0, 0, 0, 0))


def pss_sequence(n_id_2: int) -> np.ndarray:
    if n_id_2 not in (0, 1, 2):
        raise ValueError(f"n_id_2={n_id_2} outside 0..2")
    n = np.arange(SEQ_LEN)
    return 1 - 2 * _PSS_X[(n + 43 * n_id_2) % SEQ_LEN].astype(float)


def sss_sequence(n_id_1: int, n_id_2: int) -> np.ndarray:
    CellIdentity(n_id_1, n_id_2)
    m0 = 15 * (n_id_1 // 112) + 5 * n_id_2
    m1 = n_id_1 % 112
    n = np.arange(SEQ_LEN)
    return ((1 - 2 * _SSS_X0[(n + m0) % SEQ_LEN].astype(float))
            * (1 - 2 * _SSS_X1[(n + m1) % SEQ_LEN].astype(float)))


@lru_cache(maxsize=4096)
def _gold(c_init: int, length: int) -> bytes:
    nc = 1600
    total = length + nc
    x1 = np.zeros(total + 31, dtype=np.int8)
    x2 = np.zeros(total + 31, dtype=np.int8)
    x1[0] = 1
    x2[:31] = [(c_init >> i) & 1 for i in range(31)]
    for n in range(total):
        x1[n + 31] = (x1[n + 3] + x1[n]) & 1
        x2[n + 31] = (x2[n + 3] + x2[n + 2] + x2[n + 1] + x2[n]) & 1
    return ((x1[nc:nc + length] + x2[nc:nc + length]) & 1).tobytes()


def gold_sequence(c_init: int, length: int) -> np.ndarray:
    """Length-31 Gold pseudo-random sequence c(n), TS 38.211 5.2.1."""
    return np.frombuffer(_gold(int(c_init), int(length)), dtype=np.int8).copy()


def pbch_dmrs(pci, ssb_index: int) -> np.ndarray:
    cell = _as_cell(pci)
    if not 0 <= ssb_index <= 7:
        raise ValueError(f"ssb_index={ssb_index} outside 0..7")
    n_id = cell.pci
    # L_max = 8: the issb-bar term is the 3 LSBs of the SSB index
    c_init = (2 ** 11 * (ssb_index + 1) * (n_id // 4 + 1)
              + 2 ** 6 * (ssb_index + 1) + (n_id % 4))
    return modulate(gold_sequence(c_init, 2 * N_DMRS), ModScheme.QPSK)


def pbch_payload(pci, mib_bits=DEFAULT_MIB) -> np.ndarray:
    """QPSK PBCH data: the MIB repeated over 864 bits and scrambled by c(n) with c_init = PCI."""
    cell = _as_cell(pci)
    mib = np.asarray(mib_bits, dtype=np.int8)
    if mib.size != MIB_BITS or np.any((mib != 0) & (mib != 1)):
        raise ValueError(f"mib_bits must be {MIB_BITS} binary values")
    bits = np.tile(mib, 2 * N_PBCH_DATA // MIB_BITS)
    return modulate(bits ^ gold_sequence(cell.pci, bits.size), ModScheme.QPSK)


@lru_cache(maxsize=4)
def _re_masks(v: int) -> dict[str, np.ndarray]:
    k = np.arange(SSB_SUBCARRIERS)[:, None]
    l = np.arange(SSB_SYMBOLS)[None, :]
    sync_band = (k >= SYNC_FIRST_SC) & (k < SYNC_FIRST_SC + SEQ_LEN)
    pbch_region = (l == 1) | (l == 3) | ((l == 2) & ((k < 48) | (k >= 192)))
    pbch_region = np.broadcast_to(pbch_region, (SSB_SUBCARRIERS, SSB_SYMBOLS))
    dmrs = pbch_region & ((k % 4) == v)
    masks = {
        "pss": sync_band & (l == 0),
        "sss": sync_band & (l == 2),
        "dmrs": dmrs,
        "pbch": pbch_region & ~dmrs,
        "pbch_region": pbch_region.copy(),
    }
    for m in masks.values():
        m.setflags(write=False)
    return masks


def re_masks(pci) -> dict[str, np.ndarray]:
    """Boolean 240x4 masks for the PSS, SSS, DM-RS and PBCH data REs.

    Masks flatten in column-major (symbol-major) order, which is the order
    DM-RS and PBCH symbols are mapped in.
    """
    return _re_masks(_as_cell(pci).pci % 4)


def re_positions(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(subcarrier, symbol) indices of a mask in mapping order."""
    ll, kk = np.nonzero(mask.T)
    return kk, ll


@dataclass(frozen=True)
class SsbBlock:
    symbols: np.ndarray
    pci: CellIdentity
    ssb_index: int
    mib_bits: tuple[int, ...] = DEFAULT_MIB


def assemble_ssb(pci, ssb_index: int, mib_bits=DEFAULT_MIB) -> SsbBlock:
    cell = _as_cell(pci)
    masks = re_masks(cell)
    block = np.zeros((SSB_SUBCARRIERS, SSB_SYMBOLS), dtype=complex)
    block[SYNC_FIRST_SC:SYNC_FIRST_SC + SEQ_LEN, 0] = pss_sequence(cell.n_id_2)
    block[SYNC_FIRST_SC:SYNC_FIRST_SC + SEQ_LEN, 2] = sss_sequence(cell.n_id_1, cell.n_id_2)
    kk, ll = re_positions(masks["dmrs"])
    block[kk, ll] = pbch_dmrs(cell, ssb_index)
    kk, ll = re_positions(masks["pbch"])
    block[kk, ll] = pbch_payload(cell, mib_bits)
    return SsbBlock(block, cell, ssb_index, tuple(int(b) for b in mib_bits))


def burst_start_symbols(n_bursts: int = 8, scs: float = 30e3) -> list[int]:
    """First-symbol indices of the SSB candidates inside the half-frame.

    30 kHz uses the Case C pattern {2, 8} + 14n, 15 kHz the Case A pattern.
    Both coincide in symbol units; the half-frame holds 5 ms of slots.
    """
    if n_bursts not in (4, 8):
        raise ValueError(f"n_bursts must be 4 or 8, got {n_bursts}")
    return [base + 14 * n for n in range(n_bursts // 2) for base in (2, 8)]


@dataclass(frozen=True)
class SsbBurstSet:
    blocks: tuple[tuple[SsbBlock, int], ...]
    beam_gains_db: tuple[float, ...]
    periodicity_ms: float = SSB_PERIOD_MS

    @property
    def pci(self) -> CellIdentity:
        return self.blocks[0][0].pci

    @property
    def start_symbols(self) -> list[int]:
        return [s for _, s in self.blocks]


def schedule_burst_set(pci, n_bursts: int = 8, boost_index: int = 0, boost_db: float = 0.0,
                       scs: float = 30e3, mib_bits=DEFAULT_MIB) -> SsbBurstSet:
    if not 0 <= boost_index < n_bursts:
        raise ValueError(f"boost_index={boost_index} outside 0..{n_bursts - 1}")
    cell = _as_cell(pci)
    starts = burst_start_symbols(n_bursts, scs)
    blocks = tuple((assemble_ssb(cell, i, mib_bits), s) for i, s in enumerate(starts))
    gains = [0.0] * n_bursts
    gains[boost_index] = float(boost_db)
    return SsbBurstSet(blocks, tuple(gains))


def ssb_subcarrier_offset(n_subcarriers: int) -> int:
    """Grid row of SSB subcarrier 0 when the SSB sits at the band center."""
    return (n_subcarriers - SSB_SUBCARRIERS) // 2


def place_burst_set(grid: ResourceGrid, burst_set: SsbBurstSet, amplitude: float = 1.0) -> ResourceGrid:
    """Return a copy of ``grid`` with every burst written over its SSB REs."""
    data = grid.data.copy()
    k0 = ssb_subcarrier_offset(data.shape[0])
    for (block, start), gain_db in zip(burst_set.blocks, burst_set.beam_gains_db):
        if start + SSB_SYMBOLS > data.shape[1]:
            continue
        scale = amplitude * 10 ** (gain_db / 20)
        data[k0:k0 + SSB_SUBCARRIERS, start:start + SSB_SYMBOLS] = scale * block.symbols
    return ResourceGrid(data, grid.numerology)


def ssb_occupancy(n_subcarriers: int, n_symbols: int, burst_set: SsbBurstSet) -> np.ndarray:
    """Boolean grid-sized mask of the REs reserved for SSB bursts."""
    occ = np.zeros((n_subcarriers, n_symbols), dtype=bool)
    k0 = ssb_subcarrier_offset(n_subcarriers)
    for start in burst_set.start_symbols:
        if start < n_symbols:
            occ[k0:k0 + SSB_SUBCARRIERS, start:start + SSB_SYMBOLS] = True
    return occ
