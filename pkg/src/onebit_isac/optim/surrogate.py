"""Two-stage minorize-maximize surrogates of the concentrated radar metric.

Stage one replaces s^H M(x)^{-1} s by a concave quadratic that touches it at the
anchor. Stage two replaces the quadratic by a linear function that is a valid
minorizer on the constant-power sphere ||x||^2 = E.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..model import RadarChannel, SystemConfig
from ..radar import RadarMetric, interference_matrix


@dataclass(frozen=True)
class SurrogateState:
    metric: RadarMetric
    anchor: np.ndarray
    g0: np.ndarray
    m_t: np.ndarray
    m_tilde: np.ndarray
    ell_max: float
    const1: float
    # u = M_t^{-1} G_0 x_t; row q of v is G_q^H u.
    u: np.ndarray
    v: np.ndarray
    w_t: np.ndarray | None = None
    const2: float | None = None

    def quadratic(self, x: np.ndarray) -> float:
        mu = self.metric.gain
        x = np.asarray(x)
        quad = float(np.vdot(x, self.m_tilde @ x).real)
        return -mu * quad + 2.0 * mu * float(np.vdot(self.u, self.g0 @ x).real) + self.const1

    def linear(self, x: np.ndarray) -> float:
        if self.w_t is None or self.const2 is None:
            raise ValueError("linear stage not built; call majorize_to_linear")
        return float(np.vdot(self.w_t, x).real) + self.const2


def largest_eigenvalue(v: np.ndarray, weights: np.ndarray) -> float:
    """Top eigenvalue of sum_q w_q v_q v_q^H, computed on the Q x Q Gram matrix."""
    if v.shape[0] == 0:
        return 0.0
    sw = np.sqrt(np.asarray(weights, dtype=float))
    gram = (sw[:, None] * (v.conj() @ v.T)) * sw[None, :]
    return max(0.0, float(np.linalg.eigvalsh(gram)[-1]))


def minorize_inverse_quadratic(
    x_t: np.ndarray, ch: RadarChannel, cfg: SystemConfig, metric: RadarMetric | None = None
) -> SurrogateState:
    metric = metric or RadarMetric.for_adc(cfg)
    x_t = np.asarray(x_t, dtype=complex)
    weights = np.asarray(metric.clutter_weights, dtype=float)
    m_t = interference_matrix(x_t, ch, weights)
    u = cho_solve(cho_factor(m_t, lower=True), ch.g0 @ x_t)
    if ch.gq:
        v = np.stack([g.conj().T @ u for g in ch.gq])
    else:
        v = np.zeros((0, x_t.size), dtype=complex)
    return SurrogateState(
        metric=metric,
        anchor=x_t,
        g0=ch.g0,
        m_t=m_t,
        m_tilde=(v.T * weights) @ v.conj(),
        ell_max=largest_eigenvalue(v, weights),
        const1=-metric.gain * float(np.vdot(u, u).real),
        u=u,
        v=v,
    )


def majorize_to_linear(state: SurrogateState, cfg: SystemConfig) -> SurrogateState:
    """Attach w_t and const2 so that Re(w_t^H x) + const2 minorizes on ||x||^2 = E."""
    mu = state.metric.gain
    x_t = state.anchor
    shifted = state.m_tilde @ x_t - state.ell_max * x_t
    w_t = 2.0 * mu * (state.g0.conj().T @ state.u) - 2.0 * mu * shifted
    const2 = state.const1 - mu * state.ell_max * cfg.power_budget + mu * float(np.vdot(x_t, shifted).real)
    return replace(state, w_t=w_t, const2=const2)


def linear_surrogate(
    x_t: np.ndarray, ch: RadarChannel, cfg: SystemConfig, metric: RadarMetric | None = None
) -> SurrogateState:
    return majorize_to_linear(minorize_inverse_quadratic(x_t, ch, cfg, metric), cfg)
