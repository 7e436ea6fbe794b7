"""QoS- and QoD-constrained transmit designs by minorize-maximize iterations.

Every configuration shares one loop: build the linear surrogate of the radar
metric at x_t, solve the resulting subproblem (binary ILP for the 1-bit DAC,
ball-constrained LP for the infinite-resolution DAC) and accept x_{t+1} only
when the true metric does not drop.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .comm import QosConstraintSet, build_mmse_constraints, build_qos_constraints, safe_margins
from .model import (
    CommChannels,
    RadarChannel,
    SignalMode,
    SystemConfig,
    TransmitSignal,
    continuous_signal,
    quantize_dac_1bit,
    radar_channels,
    rotate_channels,
    steering_vector,
)
from .optim.bnb import DEFAULT_NODE_LIMIT, BnbStatus, solve_bnb
from .optim.continuous import feasible_point_on_sphere, maximize_over_ball
from .optim.ilp import IlpInstance, realify, to_complex, to_real
from .optim.surrogate import linear_surrogate
from .radar import AdcMode, RadarMetric, ReceiveFilter, concentrated_metric, receive_filter


class DesignKind(str, enum.Enum):
    QOS = "QosConstrained"
    QOD = "QodConstrained"


class DacMode(str, enum.Enum):
    ONE_BIT = "OneBit"
    INFINITE = "Infinite"


class CommMetric(str, enum.Enum):
    SAFE_MARGIN = "safe_margin"
    MMSE = "mmse"


class DesignStatus(str, enum.Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class DesignProblem:
    kind: DesignKind
    cfg: SystemConfig
    channels: CommChannels
    symbols: np.ndarray
    comm_threshold: tuple[float, ...] | None = None  # Gamma per user, linear
    radar_threshold: float | None = None  # chi, linear
    dac_mode: DacMode = DacMode.ONE_BIT
    adc_mode: AdcMode = AdcMode.ONE_BIT
    comm_metric: CommMetric = CommMetric.SAFE_MARGIN
    max_iters: int = 50
    tolerance: float = 1e-4
    node_limit: int = DEFAULT_NODE_LIMIT
    x_init: tuple[np.ndarray, ...] = ()
    radar: RadarChannel | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DesignKind(self.kind))
        object.__setattr__(self, "dac_mode", DacMode(self.dac_mode))
        object.__setattr__(self, "adc_mode", AdcMode(self.adc_mode))
        object.__setattr__(self, "comm_metric", CommMetric(self.comm_metric))
        object.__setattr__(self, "symbols", np.asarray(self.symbols, dtype=complex))
        n_users = self.channels.h.shape[0]
        if self.kind is DesignKind.QOS:
            if self.comm_threshold is None or len(self.comm_threshold) != n_users:
                raise ValueError("QoS design needs one Gamma per user")
            if any(g < 0 for g in self.comm_threshold):
                raise ValueError("Gamma must be nonnegative")
            object.__setattr__(self, "comm_threshold", tuple(float(g) for g in self.comm_threshold))
        else:
            if self.radar_threshold is None or self.radar_threshold < 0:
                raise ValueError("QoD design needs chi >= 0")
        if self.symbols.shape != (n_users,):
            raise ValueError("need one symbol per user")
        if self.radar is None:
            object.__setattr__(self, "radar", radar_channels(self.cfg))

    @property
    def metric(self) -> RadarMetric:
        return RadarMetric.for_adc(self.cfg, self.adc_mode)

    @property
    def label(self) -> str:
        base = f"{self.dac_mode.value}-{self.adc_mode.value}"
        return base + ("-mmse" if self.comm_metric is CommMetric.MMSE else "")


@dataclass(frozen=True)
class DesignResult:
    x: TransmitSignal | None
    f: ReceiveFilter | None
    objective_trace: tuple[float, ...]
    final_qscnr: float
    final_min_margin: float
    status: DesignStatus
    iterations: int
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def feasible(self) -> bool:
        return self.status is not DesignStatus.INFEASIBLE


def _infeasible(info: dict) -> DesignResult:
    meta = {"reason": "infeasible", **info}
    return DesignResult(None, None, (), math.nan, math.nan, DesignStatus.INFEASIBLE, 0, meta)


def comm_rows(p: DesignProblem) -> QosConstraintSet:
    """Communication rows: fixed thresholds for QoS, scale-free (coupled) rows for QoD.

    A QoS user with Gamma_u = 0 places no demand, so its rows are left out.
    """
    n_users = p.channels.h.shape[0]
    gammas = p.comm_threshold if p.kind is DesignKind.QOS else (0.0,) * n_users
    builder = build_mmse_constraints if p.comm_metric is CommMetric.MMSE else build_qos_constraints
    rows = builder(p.channels, p.symbols, gammas, p.cfg)
    if p.kind is DesignKind.QOD or all(g > 0 for g in gammas):
        return rows
    keep = np.repeat(np.asarray(gammas) > 0, rows.rows_per_user)
    return replace(
        rows, a_matrix=rows.a_matrix[keep], thresholds=rows.thresholds[keep], coupling=rows.coupling[keep]
    )


def _min_margin(p: DesignProblem, x: np.ndarray) -> float:
    rot = rotate_channels(p.channels, p.symbols).rotated
    return float(np.min(safe_margins(rot, x, p.cfg.modulation_order)))


def _radar_value(p: DesignProblem, x: np.ndarray) -> float:
    return concentrated_metric(x, p.radar, p.metric)


def _coupled_level(rows: QosConstraintSet, x: np.ndarray) -> float:
    """Largest lambda with Re(A x) - coupling * lambda >= thresholds (QoD objective)."""
    inst = realify(np.zeros(x.size), rows.a_matrix, rows.thresholds, 1.0, rows.coupling)
    return inst.lambda_at(to_real(x))


def _signal(p: DesignProblem, x: np.ndarray) -> TransmitSignal:
    mode = SignalMode.ONE_BIT if p.dac_mode is DacMode.ONE_BIT else SignalMode.CONTINUOUS
    return TransmitSignal(np.asarray(x, dtype=complex), mode)


def _candidates(p: DesignProblem) -> list[np.ndarray]:
    g_t = steering_vector(p.cfg.target_angle, p.cfg.n_tx)
    out = [quantize_dac_1bit(g_t.conj(), p.cfg).x]
    if p.dac_mode is DacMode.INFINITE:
        out.insert(0, continuous_signal(g_t.conj(), p.cfg).x)
    for x in p.x_init:
        x = np.asarray(x, dtype=complex)
        if p.dac_mode is DacMode.ONE_BIT:
            x = quantize_dac_1bit(x, p.cfg).x
        else:
            x = continuous_signal(x, p.cfg).x
        out.append(x)
    return out


def _feasible_for_rows(rows: QosConstraintSet, x: np.ndarray) -> bool:
    return rows.is_satisfied(x)


def _best_feasible(p: DesignProblem, cands: Sequence[np.ndarray], ok) -> np.ndarray | None:
    best, best_val = None, -np.inf
    for x in cands:
        if ok(x):
            v = _radar_value(p, x)
            if v > best_val:
                best, best_val = x, v
    return best


def initialize_x(p: DesignProblem) -> tuple[TransmitSignal | None, dict]:
    """Feasible starting point for the MM loop, or (None, info) when none exists."""
    cands = _candidates(p)
    info: dict = {}
    if p.kind is DesignKind.QOS:
        rows = comm_rows(p)
        x0 = _best_feasible(p, cands, lambda x: _feasible_for_rows(rows, x))
        if x0 is not None:
            return _signal(p, x0), info
        x0 = _comm_feasibility(p, rows, cands[0], info)
        return (None if x0 is None else _signal(p, x0)), info
    chi = float(p.radar_threshold)
    x0 = _best_feasible(p, cands, lambda x: _radar_value(p, x) >= chi)
    if x0 is not None:
        return _signal(p, x0), info
    # push the radar metric up without communication rows and retry
    radar_only = _mm_loop(p, _signal(p, cands[0]), rows=None, qod_chi=None)
    info["radar_only_value"] = radar_only.final_qscnr
    if radar_only.x is not None and radar_only.final_qscnr >= chi:
        return radar_only.x, info
    info["reason"] = "radar threshold above the achievable radar metric"
    return None, info


def _comm_feasibility(p: DesignProblem, rows: QosConstraintSet, ref: np.ndarray, info: dict) -> np.ndarray | None:
    if p.dac_mode is DacMode.INFINITE:
        a = np.hstack([rows.a_matrix.real, -rows.a_matrix.imag])
        z = feasible_point_on_sphere(a, rows.thresholds, p.cfg.power_budget, to_real(ref))
        if z is None:
            info["reason"] = "communication thresholds exceed the power sphere"
            return None
        return to_complex(z)
    inst = realify(
        np.zeros(p.cfg.n_tx), rows.a_matrix, rows.thresholds, p.cfg.amplitude, np.ones(rows.n_rows)
    )
    res = solve_bnb(inst, warm_start=to_real(ref), node_limit=p.node_limit, target=0.0)
    info["feasibility_nodes"] = res.nodes
    if res.found and res.value >= 0.0:
        return to_complex(res.z)
    info["reason"] = "no alphabet point meets the communication thresholds"
    info["best_feasibility_level"] = res.value if res.found else None
    if res.status is BnbStatus.NODE_LIMIT:
        info["node_limit_hit"] = True
    return None


def _binary_step(p, state, rows: QosConstraintSet | None, qod_chi, x_t, info) -> np.ndarray | None:
    c = p.cfg.amplitude
    w_row = state.w_t.conj()
    if qod_chi is None:
        if rows is None:
            a, rhs = np.zeros((0, p.cfg.n_tx)), np.zeros(0)
        else:
            a, rhs = rows.a_matrix, rows.thresholds
        inst = realify(w_row, a, rhs, c)
    elif qod_chi <= 0.0:
        # QSCNR >= 0 always holds, so the radar row would only add surrogate slack loss
        inst = realify(np.zeros(p.cfg.n_tx), rows.a_matrix, rows.thresholds, c, rows.coupling)
    else:
        a = np.vstack([rows.a_matrix, w_row[None, :]])
        rhs = np.concatenate([rows.thresholds, [qod_chi - state.const2]])
        coupling = np.concatenate([rows.coupling, [0.0]])
        inst = realify(np.zeros(p.cfg.n_tx), a, rhs, c, coupling)
    res = solve_bnb(inst, warm_start=to_real(x_t), node_limit=p.node_limit)
    info["nodes"] = info.get("nodes", 0) + res.nodes
    if res.status is BnbStatus.NODE_LIMIT:
        info["node_limit_hit"] = True
        info["max_gap"] = max(info.get("max_gap", 0.0), res.gap)
    return None if res.z is None else to_complex(res.z)


def _continuous_step(p, state, rows: QosConstraintSet | None, qod_chi, x_t, info) -> np.ndarray | None:
    w_real = to_real(state.w_t)  # Re(w^H x) = [Re w, Im w] . [Re x, Im x]
    if rows is None:
        a_c, rhs_c = np.zeros((0, p.cfg.n_tx), dtype=complex), np.zeros(0)
        coupling_c = np.zeros(0)
    else:
        a_c, rhs_c, coupling_c = rows.a_matrix, rows.thresholds, rows.coupling
    a_real = np.hstack([a_c.real, -a_c.imag])
    if qod_chi is None:
        a = np.vstack([a_real, w_real])
        rhs = np.concatenate([rhs_c, [0.0]])
        coupling = np.concatenate([np.zeros(rhs_c.size), [1.0]])
    elif qod_chi <= 0.0:
        a, rhs, coupling = a_real, rhs_c, coupling_c
    else:
        a = np.vstack([a_real, w_real])
        rhs = np.concatenate([rhs_c, [qod_chi - state.const2]])
        coupling = np.concatenate([coupling_c, [0.0]])
    z_t = to_real(x_t)
    res = maximize_over_ball(a, rhs, coupling, p.cfg.power_budget, witness=z_t, reference=z_t)
    info["probes"] = info.get("probes", 0) + res.probes
    return None if not res.feasible else to_complex(res.z)


def _mm_loop(p: DesignProblem, x0: TransmitSignal, rows: QosConstraintSet | None, qod_chi: float | None) -> DesignResult:
    """Shared MM iteration; QoD when ``qod_chi`` is set, otherwise radar maximisation."""
    x = x0.x
    metric = p.metric
    step = _binary_step if p.dac_mode is DacMode.ONE_BIT else _continuous_step
    radar = _radar_value(p, x)

    def objective(x_vec, radar_val):
        return radar_val if qod_chi is None else _coupled_level(rows, x_vec)

    val = objective(x, radar)
    trace = [val]
    info: dict = {}
    status = DesignStatus.ITER_LIMIT
    for _ in range(p.max_iters):
        state = linear_surrogate(x, p.radar, p.cfg, metric)
        x_new = step(p, state, rows, qod_chi, x, info)
        if x_new is None:
            status = DesignStatus.CONVERGED
            break
        radar_new = _radar_value(p, x_new)
        if qod_chi is not None and radar_new < qod_chi * (1.0 - 1e-12):
            status = DesignStatus.CONVERGED
            break
        new = objective(x_new, radar_new)
        if not new >= val:
            # rounding noise only: the surrogate guarantees no true decrease
            status = DesignStatus.CONVERGED
            break
        done = abs(new - val) <= p.tolerance * max(1.0, abs(val))
        x, radar, val = x_new, radar_new, new
        trace.append(val)
        if done:
            status = DesignStatus.CONVERGED
            break
    if info.get("node_limit_hit") and status is DesignStatus.CONVERGED:
        status = DesignStatus.ITER_LIMIT
    sig = _signal(p, x)
    return DesignResult(
        x=sig,
        f=receive_filter(x, p.radar, p.cfg, p.adc_mode),
        objective_trace=tuple(trace),
        final_qscnr=radar,
        final_min_margin=_min_margin(p, x),
        status=status,
        iterations=len(trace) - 1,
        metadata=info,
    )


def design_qos(p: DesignProblem) -> DesignResult:
    if p.kind is not DesignKind.QOS:
        raise ValueError("design_qos needs a QoS problem")
    x0, info = initialize_x(p)
    if x0 is None:
        return _infeasible(info)
    return _mm_loop(p, x0, comm_rows(p), None)


def design_qod(p: DesignProblem) -> DesignResult:
    if p.kind is not DesignKind.QOD:
        raise ValueError("design_qod needs a QoD problem")
    x0, info = initialize_x(p)
    if x0 is None:
        return _infeasible(info)
    return _mm_loop(p, x0, comm_rows(p), float(p.radar_threshold))


def design_continuous(p: DesignProblem) -> DesignResult:
    """Infinite-resolution DAC path; dispatches on the problem kind."""
    if p.dac_mode is not DacMode.INFINITE:
        raise ValueError("design_continuous needs dac_mode=Infinite")
    return design_qos(p) if p.kind is DesignKind.QOS else design_qod(p)


def solve_design(p: DesignProblem) -> DesignResult:
    return design_qos(p) if p.kind is DesignKind.QOS else design_qod(p)
