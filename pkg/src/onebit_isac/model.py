"""System configuration, array geometry, channels, quantizers and PSK alphabets."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np


class SignalMode(str, enum.Enum):
    ONE_BIT = "OneBit"
    CONTINUOUS = "Continuous"


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class SystemConfig:
    """Scene and hardware parameters.

    All ratios are linear. ``clutter_cnrs`` holds the clutter power over the
    radar noise power for each clutter source, i.e. without the 2/pi factor
    that the 1-bit receiver introduces.
    """

    n_tx: int = 128
    n_rx: int = 128
    power_budget: float = 1.0
    radar_noise_power: float = 1.0
    comm_noise_powers: tuple[float, ...] = (1.0 / db_to_linear(5.0),) * 4
    radar_snr: float = db_to_linear(15.0)
    clutter_cnrs: tuple[float, ...] = (db_to_linear(30.0), db_to_linear(30.0))
    target_angle: float = math.radians(10.0)
    clutter_angles: tuple[float, ...] = (math.radians(-50.0), math.radians(30.0))
    n_users: int = 4
    modulation_order: int = 8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "comm_noise_powers", tuple(float(v) for v in self.comm_noise_powers))
        object.__setattr__(self, "clutter_cnrs", tuple(float(v) for v in self.clutter_cnrs))
        object.__setattr__(self, "clutter_angles", tuple(float(v) for v in self.clutter_angles))
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("antenna counts must be positive")
        if self.n_users < 1:
            raise ValueError("n_users must be positive")
        if not self.power_budget > 0:
            raise ValueError("power_budget must be positive")
        if not self.radar_noise_power > 0:
            raise ValueError("radar_noise_power must be positive")
        if len(self.comm_noise_powers) != self.n_users:
            raise ValueError(
                f"comm_noise_powers has {len(self.comm_noise_powers)} entries, expected n_users={self.n_users}"
            )
        if any(not v > 0 for v in self.comm_noise_powers):
            raise ValueError("comm noise powers must be positive")
        if self.radar_snr < 0 or any(v < 0 for v in self.clutter_cnrs):
            raise ValueError("SNR/CNR values must be nonnegative")
        if len(self.clutter_cnrs) != len(self.clutter_angles):
            raise ValueError("clutter_cnrs and clutter_angles must have equal length")
        m = self.modulation_order
        if m < 2 or m & (m - 1):
            raise ValueError("modulation_order must be a power of two >= 2")

    @property
    def n_clutter(self) -> int:
        return len(self.clutter_angles)

    @property
    def amplitude(self) -> float:
        """Per-component magnitude sqrt(E / (2 N_T)) of the 1-bit alphabet."""
        return math.sqrt(self.power_budget / (2.0 * self.n_tx))

    def with_users(self, n_users: int, comm_noise_power: float | None = None) -> "SystemConfig":
        sigma2 = self.comm_noise_powers[0] if comm_noise_power is None else comm_noise_power
        return replace(self, n_users=n_users, comm_noise_powers=(sigma2,) * n_users)

    def with_comm_snr_db(self, snr_db: float) -> "SystemConfig":
        """Set every user's noise power from SNR_C = E / sigma_C^2."""
        sigma2 = self.power_budget / db_to_linear(snr_db)
        return replace(self, comm_noise_powers=(sigma2,) * self.n_users)


@dataclass(frozen=True)
class SteeringPair:
    g_tx: np.ndarray
    g_rx: np.ndarray


@dataclass(frozen=True)
class RadarChannel:
    g0: np.ndarray
    gq: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class CommChannels:
    """Per-user channels ``h`` (U x N_T) and their symbol-rotated versions."""

    h: np.ndarray
    rotated: np.ndarray | None = None


@dataclass(frozen=True)
class TransmitSignal:
    x: np.ndarray
    mode: SignalMode

    @property
    def power(self) -> float:
        return float(np.vdot(self.x, self.x).real)


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray = field(repr=False)
    gray: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    def bit_errors(self, sent: np.ndarray, decided: np.ndarray) -> np.ndarray:
        """Number of differing Gray-coded bits between index arrays."""
        diff = np.bitwise_xor(self.gray[sent], self.gray[decided])
        return _popcount(diff)


def _popcount(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    count = np.zeros_like(values)
    while np.any(values):
        count += values & 1
        values = values >> 1
    return count


def psk_constellation(order: int) -> Constellation:
    if order < 2 or order & (order - 1):
        raise ValueError("PSK order must be a power of two >= 2")
    m = np.arange(order)
    points = np.exp(2j * np.pi * m / order)
    gray = m ^ (m >> 1)
    return Constellation(order=order, points=points, gray=gray)


def steering_vector(angle: float, n_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response exp(-j pi k sin(angle)) / sqrt(N)."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    k = np.arange(n_antennas)
    return np.exp(-1j * np.pi * k * np.sin(angle)) / np.sqrt(n_antennas)


def steering_pair(angle: float, cfg: SystemConfig) -> SteeringPair:
    return SteeringPair(steering_vector(angle, cfg.n_tx), steering_vector(angle, cfg.n_rx))


def radar_channel(angle: float, cfg: SystemConfig) -> np.ndarray:
    """Equivalent two-way channel g_R(angle) g_T(angle)^T (rank one, unit Frobenius norm)."""
    pair = steering_pair(angle, cfg)
    return np.outer(pair.g_rx, pair.g_tx)


def radar_channels(cfg: SystemConfig) -> RadarChannel:
    return RadarChannel(
        g0=radar_channel(cfg.target_angle, cfg),
        gq=tuple(radar_channel(a, cfg) for a in cfg.clutter_angles),
    )


def _sign(values: np.ndarray) -> np.ndarray:
    # sign(0) := +1 keeps both quantizers total
    return np.where(values >= 0, 1.0, -1.0)


def quantize_adc_1bit(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    return _sign(r.real) + 1j * _sign(r.imag)


def quantize_dac_1bit(x_o: np.ndarray, cfg: SystemConfig) -> TransmitSignal:
    x_o = np.asarray(x_o, dtype=complex)
    if x_o.shape != (cfg.n_tx,):
        raise ValueError(f"expected length {cfg.n_tx}, got shape {x_o.shape}")
    return TransmitSignal(cfg.amplitude * quantize_adc_1bit(x_o), SignalMode.ONE_BIT)


def continuous_signal(x: np.ndarray, cfg: SystemConfig) -> TransmitSignal:
    """Scale ``x`` onto the power sphere ||x||^2 = E."""
    x = np.asarray(x, dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("cannot normalise a zero vector")
    return TransmitSignal(x * (math.sqrt(cfg.power_budget) / norm), SignalMode.CONTINUOUS)


def is_on_alphabet(x: np.ndarray, cfg: SystemConfig, atol: float = 0.0) -> bool:
    c = cfg.amplitude
    x = np.asarray(x)
    return bool(
        np.all(np.abs(np.abs(x.real) - c) <= atol) and np.all(np.abs(np.abs(x.imag) - c) <= atol)
    )


def draw_comm_channels(cfg: SystemConfig, rng: np.random.Generator) -> CommChannels:
    """i.i.d. CN(0, 1) Rayleigh channels, one row per user."""
    shape = (cfg.n_users, cfg.n_tx)
    h = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return CommChannels(h=h)


def rotate_channels(channels: CommChannels, symbols: Sequence[complex]) -> CommChannels:
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape != (channels.h.shape[0],):
        raise ValueError("need one symbol per user")
    if np.any(symbols == 0):
        raise ValueError("symbol phase undefined for a zero symbol")
    phase = np.exp(1j * np.angle(symbols))
    return CommChannels(h=channels.h, rotated=channels.h * phase[:, None])


def draw_symbols(
    constellation: Constellation, n_users: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform symbol indices and the corresponding unit-modulus symbols."""
    idx = rng.integers(0, constellation.order, size=n_users)
    return idx, constellation.points[idx]
