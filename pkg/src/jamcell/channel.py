"""Link budget, thermal noise and a tapped-delay-line fading channel."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .waveform import NumerologyConfig

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0
DEFAULT_NOISE_FIGURE_DB = 7.0


def dbm_to_watt(dbm):
    return 10 ** ((np.asarray(dbm, dtype=float) - 30) / 10)


def watt_to_dbm(watt):
    return 10 * np.log10(np.asarray(watt, dtype=float)) + 30


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float
    tx_gain_db: float
    rx_gain_db: float
    carrier_hz: float
    distance_m: float

    def __post_init__(self):
        if self.carrier_hz <= 0:
            raise ValueError(f"carrier must be positive, got {self.carrier_hz}")
        if self.distance_m <= 0:
            raise ValueError(f"distance must be positive, got {self.distance_m}")


def fspl_db(carrier_hz, distance_m):
    """Free-space path loss 20*log10(4*pi*d/lambda). Accepts arrays."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    wavelength = SPEED_OF_LIGHT / np.asarray(carrier_hz, dtype=float)
    loss = 20 * np.log10(4 * np.pi * d / wavelength)
    return float(loss) if loss.ndim == 0 else loss


def received_power_dbm(b: LinkBudget) -> float:
    return b.tx_power_dbm + b.tx_gain_db + b.rx_gain_db - fspl_db(b.carrier_hz, b.distance_m)


def noise_power_re_dbm(scs_hz: float, noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    if scs_hz <= 0:
        raise ValueError(f"subcarrier spacing must be positive, got {scs_hz}")
    return THERMAL_NOISE_DBM_HZ + 10 * np.log10(scs_hz) + noise_figure_db


@dataclass(frozen=True)
class FadingProfile:
    normalized_delays: tuple[float, ...]
    tap_powers_db: tuple[float, ...]
    delay_spread_ns: float

    def __post_init__(self):
        if len(self.normalized_delays) != len(self.tap_powers_db) or not self.normalized_delays:
            raise ValueError("delays and powers must be non-empty and of equal length")
        d = np.asarray(self.normalized_delays)
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise ValueError("delays must be non-negative and sorted")
        if self.delay_spread_ns < 0:
            raise ValueError("delay spread must be non-negative")

    @property
    def linear_powers(self) -> np.ndarray:
        """Tap powers normalized to unit sum."""
        p = 10 ** (np.asarray(self.tap_powers_db) / 10)
        return p / p.sum()

    @classmethod
    def from_table(cls, delays, powers_db, delay_spread_ns: float) -> "FadingProfile":
        order = np.argsort(np.asarray(delays, dtype=float), kind="stable")
        return cls(tuple(float(delays[i]) for i in order),
                   tuple(float(powers_db[i]) for i in order), float(delay_spread_ns))

    @classmethod
    def from_csv(cls, path, delay_spread_ns: float) -> "FadingProfile":
        """Load a ``delay,power_db`` table (header row required)."""
        with open(Path(path), newline="") as fh:
            rows = list(csv.DictReader(r for r in fh if not r.startswith("#")))
        return cls.from_table([float(r["delay"]) for r in rows],
                              [float(r["power_db"]) for r in rows], delay_spread_ns)


# TR 38.901 Table 7.7.1-1 (CDL-A) cluster normalized delays and powers
_CDL_A = (
    (0.0000, -13.4), (0.3819, 0.0), (0.4025, -2.2), (0.5868, -4.0),
    (0.4610, -6.0), (0.5375, -8.2), (0.6708, -9.9), (0.5750, -10.5),
    (0.7618, -7.5), (1.5375, -15.9), (1.8978, -6.6), (2.2242, -16.7),
    (2.1717, -12.4), (2.4942, -15.2), (2.5119, -10.8), (3.0582, -11.3),
    (4.0810, -12.7), (4.4579, -16.2), (4.5695, -18.3), (4.7966, -18.9),
    (5.0066, -16.6), (5.3043, -19.9), (9.6586, -29.7),
)


def cdl_a(delay_spread_ns: float = 30.0) -> FadingProfile:
    return FadingProfile.from_table([d for d, _ in _CDL_A], [p for _, p in _CDL_A], delay_spread_ns)


def flat_profile() -> FadingProfile:
    return FadingProfile((0.0,), (0.0,), 0.0)


@dataclass(frozen=True)
class ChannelRealization:
    taps: np.ndarray
    seed: int | None = None

    @classmethod
    def identity(cls) -> "ChannelRealization":
        return cls(np.array([1.0 + 0j]))


def tap_bins(profile: FadingProfile, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Sample-grid delays and per-bin power after merging taps that share a bin."""
    delays = np.rint(np.asarray(profile.normalized_delays) * profile.delay_spread_ns * 1e-9
                     * sample_rate).astype(int)
    power = np.zeros(delays.max() + 1)
    np.add.at(power, delays, profile.linear_powers)
    return np.nonzero(power)[0], power[power > 0]


def realize_fading(profile: FadingProfile, numerology: NumerologyConfig, seed=None,
                   rng: np.random.Generator | None = None) -> ChannelRealization:
    """Draw one quasi-static Rayleigh realization of the tapped delay line."""
    if rng is None:
        rng = np.random.default_rng(seed)
    bins, power = tap_bins(profile, numerology.sample_rate)
    g = (rng.standard_normal(bins.size) + 1j * rng.standard_normal(bins.size)) / np.sqrt(2)
    taps = np.zeros(bins[-1] + 1, dtype=complex)
    taps[bins] = np.sqrt(power) * g
    return ChannelRealization(taps, seed if isinstance(seed, (int, np.integer)) else None)


def apply_channel(samples, ch: ChannelRealization, net_gain_db: float = 0.0) -> np.ndarray:
    """Convolve with the taps (tail truncated) and apply the link gain."""
    x = np.asarray(samples, dtype=complex)
    taps = ch.taps
    if taps.size == 1:
        y = x * taps[0]
    else:
        y = np.convolve(x, taps)[:x.size]
    return y * 10 ** (net_gain_db / 20)


def wideband_gain(tap_powers, rng: np.random.Generator, size) -> np.ndarray:
    """Frequency-averaged power gain sum(|h_i|^2) of independent realizations."""
    power = np.asarray(tap_powers, dtype=float)
    shape = tuple(np.atleast_1d(size)) + (power.size,)
    g = (rng.standard_normal(shape) ** 2 + rng.standard_normal(shape) ** 2) / 2
    return g @ power
