"""Receive filtering, (Q)SCNR metrics, GLRT detection and the radar power model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import RadarChannel, SystemConfig, TransmitSignal

TWO_OVER_PI = 2.0 / math.pi


class AdcMode(str, enum.Enum):
    ONE_BIT = "OneBit"
    INFINITE = "Infinite"


class DegenerateGeometryError(ValueError):
    """The transmit signal puts no energy on the target channel."""


@dataclass(frozen=True)
class RadarMetric:
    """Weights of the generic ratio  gain |f^H G0 x|^2 / (sum_q w_q |f^H Gq x|^2 + ||f||^2)."""

    gain: float
    clutter_weights: tuple[float, ...]

    @classmethod
    def for_adc(cls, cfg: SystemConfig, adc: AdcMode | str = AdcMode.ONE_BIT) -> "RadarMetric":
        if AdcMode(adc) is AdcMode.ONE_BIT:
            return cls(TWO_OVER_PI * cfg.radar_snr, tuple(TWO_OVER_PI * c for c in cfg.clutter_cnrs))
        return cls(cfg.radar_snr, tuple(cfg.clutter_cnrs))

    @property
    def upper_bound_factor(self) -> float:
        """Clutter-free ceiling per unit transmit power."""
        return self.gain


@dataclass(frozen=True)
class ReceiveFilter:
    f: np.ndarray


@dataclass(frozen=True)
class DetectionStats:
    pi0: float
    pi1: float
    filter_energy: float
    qscnr: float
    threshold: float
    pfa: float
    pd: float


@dataclass(frozen=True)
class PowerModel:
    e_rf: float = 40e-3
    e_lna: float = 20e-3
    e_bb: float = 200e-3
    fom_w: float = 500e-15
    f_s: float = 1e9
    bits_adc: int = 1
    bits_dac: int = 1

    def __post_init__(self) -> None:
        if min(self.e_rf, self.e_lna, self.e_bb, self.fom_w, self.f_s) <= 0:
            raise ValueError("power model entries must be positive")
        if self.bits_adc < 1 or self.bits_dac < 1:
            raise ValueError("converter resolution must be at least one bit")

    def converter_power(self, bits: int) -> float:
        """Walden model FOM * f_s * 2^B in watts."""
        return self.fom_w * self.f_s * 2.0**bits

    def total_power(self, n_tx: int, n_rx: int) -> float:
        # DACs sit at the N_T transmit chains, ADCs at the N_R receive chains.
        return (
            (n_tx + n_rx) * (self.e_rf + self.e_lna)
            + 2.0 * self.e_bb
            + 2.0 * n_tx * self.converter_power(self.bits_dac)
            + 2.0 * n_rx * self.converter_power(self.bits_adc)
        )


# 10-bit converters stand in for infinite resolution.
INFINITE_RESOLUTION_BITS = 10


def power_model_for(dac_one_bit: bool, adc_one_bit: bool) -> PowerModel:
    return PowerModel(
        bits_dac=1 if dac_one_bit else INFINITE_RESOLUTION_BITS,
        bits_adc=1 if adc_one_bit else INFINITE_RESOLUTION_BITS,
    )


def _vec(x: TransmitSignal | ReceiveFilter | np.ndarray) -> np.ndarray:
    if isinstance(x, TransmitSignal):
        return x.x
    if isinstance(x, ReceiveFilter):
        return x.f
    return np.asarray(x, dtype=complex)


def clutter_returns(x, ch: RadarChannel) -> np.ndarray:
    """Rows G_q x, shape (Q, N_R)."""
    x = _vec(x)
    if not ch.gq:
        return np.zeros((0, ch.g0.shape[0]), dtype=complex)
    return np.stack([g @ x for g in ch.gq])


def interference_matrix(x, ch: RadarChannel, weights) -> np.ndarray:
    """I + sum_q w_q (G_q x)(G_q x)^H, Hermitian with eigenvalues >= 1."""
    cq = clutter_returns(x, ch)
    n = ch.g0.shape[0]
    w = np.asarray(weights, dtype=float)
    return np.eye(n, dtype=complex) + (cq.T * w) @ cq.conj()


def _target_return(x, ch: RadarChannel) -> np.ndarray:
    s = ch.g0 @ _vec(x)
    if np.linalg.norm(s) <= 1e-300:
        raise DegenerateGeometryError("G_0 x = 0: transmit signal orthogonal to the target steering vector")
    return s


def _whitened(x, ch: RadarChannel, weights) -> tuple[np.ndarray, np.ndarray]:
    """Return (s, M^{-1} s) with s = G_0 x."""
    s = _target_return(x, ch)
    m = interference_matrix(x, ch, weights)
    return s, cho_solve(cho_factor(m, lower=True), s)


def receive_filter(x, ch: RadarChannel, cfg: SystemConfig, adc: AdcMode | str = AdcMode.ONE_BIT) -> ReceiveFilter:
    """Rayleigh-quotient maximiser M^{-1} G_0 x / (x^H G_0^H M^{-1} G_0 x)."""
    metric = RadarMetric.for_adc(cfg, adc)
    s, ms = _whitened(x, ch, metric.clutter_weights)
    return ReceiveFilter(ms / np.vdot(s, ms).real)


def scnr_ratio(f, x, ch: RadarChannel, metric: RadarMetric) -> float:
    f = _vec(f)
    x = _vec(x)
    num = abs(np.vdot(f, ch.g0 @ x)) ** 2
    den = float(np.vdot(f, f).real)
    for w, g in zip(metric.clutter_weights, ch.gq):
        den += w * abs(np.vdot(f, g @ x)) ** 2
    return metric.gain * num / den


def qscnr(f, x, ch: RadarChannel, cfg: SystemConfig) -> float:
    """Post-1-bit-ADC SCNR for filter ``f`` and transmit signal ``x``."""
    return scnr_ratio(f, x, ch, RadarMetric.for_adc(cfg, AdcMode.ONE_BIT))


def scnr_infinite_bit(f, x, ch: RadarChannel, cfg: SystemConfig) -> float:
    return scnr_ratio(f, x, ch, RadarMetric.for_adc(cfg, AdcMode.INFINITE))


def concentrated_metric(x, ch: RadarChannel, metric: RadarMetric) -> float:
    """Metric value after plugging in the optimal filter: gain * s^H M^{-1} s."""
    s, ms = _whitened(x, ch, metric.clutter_weights)
    return metric.gain * float(np.vdot(s, ms).real)


def qscnr_concentrated(x, ch: RadarChannel, cfg: SystemConfig) -> float:
    return concentrated_metric(x, ch, RadarMetric.for_adc(cfg, AdcMode.ONE_BIT))


def scnr_concentrated(x, ch: RadarChannel, cfg: SystemConfig) -> float:
    return concentrated_metric(x, ch, RadarMetric.for_adc(cfg, AdcMode.INFINITE))


def clutter_power_h0(f, x, ch: RadarChannel, cfg: SystemConfig) -> float:
    """Pi_0 = sum_q 4 cnr_q / pi |f^H G_q x|^2."""
    f = _vec(f)
    x = _vec(x)
    return sum(4.0 * c / math.pi * abs(np.vdot(f, g @ x)) ** 2 for c, g in zip(cfg.clutter_cnrs, ch.gq))


def clutter_power_h1(f, x, ch: RadarChannel, cfg: SystemConfig) -> float:
    f = _vec(f)
    x = _vec(x)
    target = 4.0 * cfg.radar_snr / math.pi * abs(np.vdot(f, ch.g0 @ x)) ** 2
    return target + clutter_power_h0(f, x, ch, cfg)


def _check_probability(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {delta}")


def threshold_from_variance(delta: float, variance_h0: float) -> float:
    _check_probability(delta)
    return math.sqrt(-variance_h0 * math.log(delta))


def threshold_for_pfa(delta: float, f, x, ch: RadarChannel, cfg: SystemConfig) -> float:
    """GLRT threshold sqrt(-(2||f||^2 + Pi_0) ln delta) for a target false-alarm rate."""
    f_vec = _vec(f)
    var0 = 2.0 * float(np.vdot(f_vec, f_vec).real) + clutter_power_h0(f_vec, x, ch, cfg)
    return threshold_from_variance(delta, var0)


def pfa_of_threshold(threshold: float, variance_h0: float) -> float:
    return math.exp(-threshold**2 / variance_h0)


def prob_detection(delta: float, qscnr_value: float) -> float:
    _check_probability(delta)
    if qscnr_value < 0:
        raise ValueError("qscnr must be nonnegative")
    return delta ** (1.0 / (1.0 + qscnr_value))


def qscnr_threshold_for(delta: float, pd: float) -> float:
    """Smallest QSCNR giving detection probability ``pd`` at false-alarm rate ``delta``."""
    _check_probability(delta)
    _check_probability(pd)
    if pd < delta:
        raise ValueError("required detection probability is below the false-alarm rate")
    return math.log(delta) / math.log(pd) - 1.0


def detection_stats(delta: float, f, x, ch: RadarChannel, cfg: SystemConfig) -> DetectionStats:
    f_vec = _vec(f)
    energy = float(np.vdot(f_vec, f_vec).real)
    pi0 = clutter_power_h0(f_vec, x, ch, cfg)
    pi1 = clutter_power_h1(f_vec, x, ch, cfg)
    q = qscnr(f_vec, x, ch, cfg)
    return DetectionStats(
        pi0=pi0,
        pi1=pi1,
        filter_energy=energy,
        qscnr=q,
        threshold=threshold_from_variance(delta, 2.0 * energy + pi0),
        pfa=delta,
        pd=prob_detection(delta, q),
    )


def glrt_statistic(f, r_quantized: np.ndarray) -> float:
    f = _vec(f)
    r_quantized = np.asarray(r_quantized)
    if f.shape != r_quantized.shape:
        raise ValueError("filter and observation lengths differ")
    return float(abs(np.vdot(f, r_quantized)))


def radar_energy_efficiency(scnr_linear: float, cfg: SystemConfig, pm: PowerModel) -> float:
    """Linear SCNR per watt of front-end power."""
    if scnr_linear < 0:
        raise ValueError("scnr must be nonnegative")
    return scnr_linear / pm.total_power(cfg.n_tx, cfg.n_rx)
