"""OFDM numerology, resource grids, constellation mapping and EVM."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SLOT = 14
SSB_N_RB = 20
SUPPORTED_SCS = (15e3, 30e3)


class ModScheme(enum.Enum):
    QPSK = 2
    QAM16 = 4
    QAM64 = 6

    @property
    def bits_per_symbol(self) -> int:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "ModScheme":
        key = name.upper().replace("-", "")
        aliases = {"16QAM": "QAM16", "64QAM": "QAM64"}
        return cls[aliases.get(key, key)]


@dataclass(frozen=True)
class NumerologyConfig:
    scs: float
    n_rb: int
    fft_size: int
    cp_lengths: tuple[int, ...]
    sample_rate: float
    symbols_per_slot: int = SYMBOLS_PER_SLOT
    slots_per_frame: int = 10

    @property
    def n_subcarriers(self) -> int:
        return SUBCARRIERS_PER_RB * self.n_rb

    @property
    def slot_samples(self) -> int:
        return sum(self.cp_lengths) + self.symbols_per_slot * self.fft_size

    @property
    def slot_duration(self) -> float:
        return 1e-3 * 10 / self.slots_per_frame

    def cp_length(self, symbol: int) -> int:
        """CP length of the symbol at absolute index ``symbol`` (slot 0, symbol 0 = 0)."""
        return self.cp_lengths[symbol % self.symbols_per_slot]

    def symbol_starts(self, n_symbols: int, first_symbol: int = 0) -> np.ndarray:
        """Sample offsets (CP included) of ``n_symbols`` consecutive symbols."""
        cps = np.array([self.cp_length(first_symbol + i) for i in range(n_symbols)])
        lengths = cps + self.fft_size
        return np.concatenate(([0], np.cumsum(lengths)[:-1])).astype(np.int64)

    def n_samples(self, n_symbols: int, first_symbol: int = 0) -> int:
        return int(sum(self.cp_length(first_symbol + i) for i in range(n_symbols))
                   + n_symbols * self.fft_size)

    def fft_bins(self) -> np.ndarray:
        """FFT bin of each occupied subcarrier; the band sits symmetrically around DC."""
        k = np.arange(self.n_subcarriers) - self.n_subcarriers // 2
        return np.mod(k, self.fft_size)


def build_numerology(scs: float, n_rb: int) -> NumerologyConfig:
    """Normal-CP numerology with the smallest power-of-two FFT covering ``n_rb``."""
    if scs not in SUPPORTED_SCS:
        raise ValueError(f"unsupported subcarrier spacing {scs} Hz (expected one of {SUPPORTED_SCS})")
    if n_rb < SSB_N_RB:
        raise ValueError(f"n_rb={n_rb} cannot host a {SSB_N_RB}-RB SSB")
    mu = int(round(np.log2(scs / 15e3)))
    n_sc = SUBCARRIERS_PER_RB * n_rb
    fft_size = 1 << int(np.ceil(np.log2(n_sc)))
    # 144 and 16 basic-unit CP lengths are defined against a 2048-point FFT
    normal = 144 * fft_size // 2048
    extra = 16 * (2 ** mu) * fft_size // 2048
    half_subframe = 7 * 2 ** mu
    cps = tuple(normal + (extra if l % half_subframe == 0 else 0)
                for l in range(SYMBOLS_PER_SLOT))
    return NumerologyConfig(
        scs=float(scs),
        n_rb=int(n_rb),
        fft_size=fft_size,
        cp_lengths=cps,
        sample_rate=float(scs) * fft_size,
        slots_per_frame=10 * 2 ** mu,
    )


@dataclass(frozen=True)
class ResourceGrid:
    """Subcarrier x symbol matrix; row 0 is the lowest occupied frequency."""

    data: np.ndarray
    numerology: NumerologyConfig

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != self.numerology.n_subcarriers:
            raise ValueError(
                f"grid shape {self.data.shape} does not match "
                f"{self.numerology.n_subcarriers} subcarriers")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("grid contains non-finite entries")

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]

    @classmethod
    def empty(cls, numerology: NumerologyConfig, n_symbols: int) -> "ResourceGrid":
        return cls(np.zeros((numerology.n_subcarriers, n_symbols), dtype=complex), numerology)


_NORM = {ModScheme.QPSK: np.sqrt(2), ModScheme.QAM16: np.sqrt(10), ModScheme.QAM64: np.sqrt(42)}


def modulate(bits, scheme: ModScheme) -> np.ndarray:
    """Gray-mapped unit-average-power symbols (I from even bits, Q from odd bits)."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    m = scheme.bits_per_symbol
    if bits.size % m:
        raise ValueError(f"{bits.size} bits is not a multiple of {m} for {scheme.name}")
    b = bits.reshape(-1, m)
    i_bits, q_bits = b[:, 0::2], b[:, 1::2]
    return (_pam(i_bits) + 1j * _pam(q_bits)) / _NORM[scheme]


def _pam(bits: np.ndarray) -> np.ndarray:
    # first bit is the sign, later bits select the magnitude ring: for 3 bits
    # (1-2b0) * (4 - (1-2b1) * (2 - (1-2b2)))
    n = bits.shape[1]
    mag = np.ones(bits.shape[0])
    for i in range(n - 1, 0, -1):
        mag = 2 ** (n - i) - (1 - 2 * bits[:, i]) * mag
    return (1 - 2 * bits[:, 0]) * mag


def constellation(scheme: ModScheme) -> np.ndarray:
    m = scheme.bits_per_symbol
    ints = np.arange(2 ** m)
    bits = (ints[:, None] >> np.arange(m - 1, -1, -1)) & 1
    return modulate(bits.ravel(), scheme)


def ofdm_modulate(grid: ResourceGrid, first_symbol: int = 0) -> np.ndarray:
    """IFFT each symbol (unitary scaling) and prepend its cyclic prefix."""
    num = grid.numerology
    n = num.fft_size
    freq = np.zeros((n, grid.n_symbols), dtype=complex)
    freq[num.fft_bins(), :] = grid.data
    time = np.fft.ifft(freq, axis=0, norm="ortho")
    out = np.empty(num.n_samples(grid.n_symbols, first_symbol), dtype=complex)
    starts = num.symbol_starts(grid.n_symbols, first_symbol)
    for i, s in enumerate(starts):
        cp = num.cp_length(first_symbol + i)
        out[s:s + cp] = time[n - cp:, i]
        out[s + cp:s + cp + n] = time[:, i]
    return out


def ofdm_demodulate(samples, numerology: NumerologyConfig, start_offset: int = 0,
                    n_symbols: int | None = None, first_symbol: int = 0) -> ResourceGrid:
    """Strip CPs and FFT. ``first_symbol`` selects where in the CP pattern
    the capture starts."""
    samples = np.asarray(samples)
    n = numerology.fft_size
    available = samples.size - start_offset
    if n_symbols is None:
        n_symbols = 0
        used = 0
        while True:
            step = numerology.cp_length(first_symbol + n_symbols) + n
            if used + step > available:
                break
            used += step
            n_symbols += 1
    if n_symbols < 1 or start_offset < 0 or numerology.n_samples(n_symbols, first_symbol) > available:
        raise ValueError(
            f"insufficient samples: {available} available after offset {start_offset}")
    starts = numerology.symbol_starts(n_symbols, first_symbol)
    cps = np.array([numerology.cp_length(first_symbol + i) for i in range(n_symbols)])
    idx = (start_offset + starts + cps)[:, None] + np.arange(n)[None, :]
    freq = np.fft.fft(samples[idx], axis=1, norm="ortho")
    return ResourceGrid(freq[:, numerology.fft_bins()].T.copy(), numerology)


def measure_evm_rms(rx, ref) -> float:
    """RMS error vector magnitude in percent, normalized by reference power."""
    rx = np.asarray(rx).ravel()
    ref = np.asarray(ref).ravel()
    if rx.size == 0 or ref.size == 0:
        raise ValueError("EVM of an empty symbol set")
    if rx.size != ref.size:
        raise ValueError(f"length mismatch: {rx.size} received vs {ref.size} reference")
    ref_power = np.mean(np.abs(ref) ** 2)
    if ref_power == 0:
        raise ValueError("reference has zero power")
    return float(100 * np.sqrt(np.mean(np.abs(rx - ref) ** 2) / ref_power))
