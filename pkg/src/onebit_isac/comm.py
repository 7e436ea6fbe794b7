"""Safe-margin metrics, SEP bounds, QoS constraint rows and PSK decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import ndtr

from .model import CommChannels, Constellation, SystemConfig, TransmitSignal, rotate_channels

# Directions of the octagon that inner-approximates the MMSE disk.
OCTAGON_ANGLES = 2.0 * np.pi * np.arange(8) / 8.0


@dataclass(frozen=True)
class SafeMarginCoeffs:
    kappa1: complex
    kappa2: complex

    @classmethod
    def for_order(cls, order: int) -> "SafeMarginCoeffs":
        cot = _cot_pi_over(order)
        return cls(kappa1=complex(1.0, cot), kappa2=complex(1.0, -cot))


def _cot_pi_over(order: int) -> float:
    if order < 2:
        raise ValueError("PSK order must be >= 2")
    if order == 2:
        return 0.0
    return 1.0 / math.tan(math.pi / order)


@dataclass(frozen=True)
class QosConstraintSet:
    """Linear rows  Re(a_k x) - coupling_k * t >= thresholds_k.

    ``t`` is only present in max-min designs; QoS designs ignore ``coupling``.
    Safe-margin rows come in pairs (kappa1, kappa2) per user, MMSE rows in
    groups of eight octagon faces per user.
    """

    a_matrix: np.ndarray
    thresholds: np.ndarray
    coupling: np.ndarray
    kind: str = "safe_margin"
    rows_per_user: int = 2
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def n_rows(self) -> int:
        return self.a_matrix.shape[0]

    def slack(self, x) -> np.ndarray:
        x = x.x if isinstance(x, TransmitSignal) else np.asarray(x)
        return (self.a_matrix @ x).real - self.thresholds

    def is_satisfied(self, x, tol: float = 1e-9) -> bool:
        scale = 1.0 + float(np.max(np.abs(self.thresholds), initial=0.0))
        return bool(np.all(self.slack(x) >= -tol * scale))


def safe_margin(h_bar_u: np.ndarray, x, order: int) -> float:
    """min over the two adjacent decision boundaries of Re(kappa h_bar^H x)."""
    x = x.x if isinstance(x, TransmitSignal) else np.asarray(x)
    v = np.vdot(h_bar_u, x)
    k = SafeMarginCoeffs.for_order(order)
    return float(min((k.kappa1 * v).real, (k.kappa2 * v).real))


def safe_margins(rotated: np.ndarray, x, order: int) -> np.ndarray:
    """Vectorised margins for every user, via Re(v) - cot(pi/M) |Im(v)|."""
    x = x.x if isinstance(x, TransmitSignal) else np.asarray(x)
    v = rotated.conj() @ x
    return v.real - _cot_pi_over(order) * np.abs(v.imag)


class SepBounds(NamedTuple):
    lower: float
    upper: float
    upper_clamped: float
    clamped: bool


def gaussian_tail(x):
    """Standard normal upper tail Psi(x)."""
    return ndtr(-np.asarray(x, dtype=float))


def sep_bound_argument(alpha, sigma_c, order: int):
    return math.sqrt(2.0) * math.sin(math.pi / order) * np.asarray(alpha, dtype=float) / sigma_c


def sep_bounds(alpha: float, sigma_c: float, order: int) -> SepBounds:
    if not sigma_c > 0:
        raise ValueError("sigma_c must be positive")
    lower = float(gaussian_tail(sep_bound_argument(alpha, sigma_c, order)))
    upper = 2.0 * lower
    return SepBounds(lower, upper, min(1.0, upper), upper > 1.0)


def build_qos_constraints(
    channels: CommChannels,
    symbols: Sequence[complex],
    gammas: Sequence[float],
    cfg: SystemConfig,
) -> QosConstraintSet:
    gammas = np.asarray(gammas, dtype=float)
    n_users = channels.h.shape[0]
    if gammas.shape != (n_users,):
        raise ValueError("need one QoS threshold per user")
    if np.any(gammas < 0):
        raise ValueError("QoS thresholds must be nonnegative")
    rot = rotate_channels(channels, symbols).rotated
    k = SafeMarginCoeffs.for_order(cfg.modulation_order)
    rows = np.empty((2 * n_users, channels.h.shape[1]), dtype=complex)
    rows[0::2] = k.kappa1 * rot.conj()
    rows[1::2] = k.kappa2 * rot.conj()
    lam = np.sqrt(gammas * np.asarray(cfg.comm_noise_powers[:n_users]))
    return QosConstraintSet(
        a_matrix=rows,
        thresholds=np.repeat(lam, 2),
        coupling=np.ones(2 * n_users),
        kind="safe_margin",
        rows_per_user=2,
    )


def mmse_disk(gammas: Sequence[float], cfg: SystemConfig, n_users: int) -> tuple[np.ndarray, np.ndarray]:
    """Centre scale sqrt(Gamma sigma^2) sec(pi/M) and radius sqrt(Gamma sigma^2) tan(pi/M) per user."""
    lam = np.sqrt(np.asarray(gammas, dtype=float) * np.asarray(cfg.comm_noise_powers[:n_users]))
    t = math.pi / cfg.modulation_order
    return lam / math.cos(t), lam * math.tan(t)


def build_mmse_constraints(
    channels: CommChannels,
    symbols: Sequence[complex],
    gammas: Sequence[float],
    cfg: SystemConfig,
) -> QosConstraintSet:
    """Octagon inner approximation of |h_u^H x - c_u| <= eps_u.

    Working in the symbol-rotated frame the centre is real and positive. Each
    face reads Re(e^{-j theta_k}(h_bar^H x - c)) <= eps cos(pi/8), so every
    point meeting all eight faces lies inside the disk. The ``coupling`` column
    describes the scale-free variant used by max-min designs, where the centre
    and radius both grow linearly with the design variable.
    """
    gammas = np.asarray(gammas, dtype=float)
    n_users = channels.h.shape[0]
    if gammas.shape != (n_users,):
        raise ValueError("need one threshold per user")
    if np.any(gammas < 0):
        raise ValueError("thresholds must be nonnegative")
    rot = rotate_channels(channels, symbols).rotated
    centres, radii = mmse_disk(gammas, cfg, n_users)
    t = math.pi / cfg.modulation_order
    sec, tan = 1.0 / math.cos(t), math.tan(t)
    apothem = math.cos(math.pi / 8.0)
    phase = np.exp(-1j * OCTAGON_ANGLES)
    rows, rhs, coupling = [], [], []
    for u in range(n_users):
        for k in range(8):
            rows.append(-phase[k] * rot[u].conj())
            rhs.append(-(radii[u] * apothem + (phase[k] * centres[u]).real))
            coupling.append(-(sec * math.cos(OCTAGON_ANGLES[k]) + tan * apothem))
    return QosConstraintSet(
        a_matrix=np.asarray(rows),
        thresholds=np.asarray(rhs),
        coupling=np.asarray(coupling),
        kind="mmse",
        rows_per_user=8,
        metadata={"mmse_centre_scale": centres.tolist(), "mmse_radius": radii.tolist()},
    )


def decode_psk(y, constellation: Constellation, rtol: float = 1e-12):
    """Nearest-neighbour PSK decision; boundary ties go to the smaller index.

    Accepts a scalar or an array of received samples.
    """
    y_arr = np.asarray(y, dtype=complex)
    scores = (y_arr[..., None] * constellation.points.conj()).real
    best = scores.max(axis=-1, keepdims=True)
    tol = rtol * np.maximum(np.abs(y_arr)[..., None], 1e-300)
    idx = np.argmax(scores >= best - tol, axis=-1)
    if np.ndim(y) == 0:
        return int(idx)
    return idx
