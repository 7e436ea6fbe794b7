"""Monte Carlo engines: empirical QSCNR, detector ROC and symbol/bit error rates.

Random numbers come from counter-based substreams: trial block ``b`` of stream
``s`` always uses Philox keyed by (seed, s, b). Results therefore depend only on
the seed, never on the batch size or on the order in which blocks run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .comm import decode_psk, gaussian_tail, safe_margins, sep_bound_argument
from .designs import DesignKind, DesignProblem, DesignResult, solve_design
from .model import (
    RadarChannel,
    SystemConfig,
    db_to_linear,
    psk_constellation,
    quantize_adc_1bit,
    rotate_channels,
)
from .radar import AdcMode, _vec, clutter_power_h0, clutter_returns, prob_detection, qscnr, scnr_infinite_bit

RNG_BLOCK = 1024
MIN_TRIALS = 1000
MAX_SYMBOL_USERS = 64

# stream ids
_H0, _H1, _SYMBOLS, _NOISE = 0, 1, 2, 3


def substream(seed: int, stream: int, *block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream, *block))))


@dataclass(frozen=True)
class McConfig:
    n_trials: int = 100_000
    rng_seed: int = 0
    batch: int = 16 * RNG_BLOCK

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be positive")
        if self.batch < 1:
            raise ValueError("batch must be positive")

    def require_statistical(self) -> None:
        if self.n_trials < MIN_TRIALS:
            raise ValueError(f"n_trials={self.n_trials} is below {MIN_TRIALS}; refusing statistical output")


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n: int
    details: dict = field(default_factory=dict, compare=False)


def binomial_estimate(successes: int, n: int) -> McEstimate:
    p = successes / n
    return McEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n, {"count": int(successes)})


def _blocks(mc: McConfig):
    """Yield (first_block, n_blocks) groups covering n_trials."""
    total = -(-mc.n_trials // RNG_BLOCK)
    per = max(1, mc.batch // RNG_BLOCK)
    for start in range(0, total, per):
        yield start, min(per, total - start)


def _cn(rng: np.random.Generator, shape, var: float | np.ndarray) -> np.ndarray:
    scale = np.sqrt(np.asarray(var) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def filter_outputs(
    x, f, ch: RadarChannel, cfg: SystemConfig, mc: McConfig, adc: AdcMode | str = AdcMode.ONE_BIT
) -> tuple[np.ndarray, np.ndarray]:
    """Per-trial filter outputs z = f^H r~ under H0 and H1 (independent streams)."""
    x, f = _vec(x), _vec(f)
    quantize = AdcMode(adc) is AdcMode.ONE_BIT
    s = ch.g0 @ x
    cq = clutter_returns(x, ch)
    sigma2 = cfg.radar_noise_power
    var_target = cfg.radar_snr * sigma2
    var_clutter = np.asarray(cfg.clutter_cnrs) * sigma2
    n_rx = s.size
    out = {}
    for hyp in (_H0, _H1):
        parts = []
        for start, count in _blocks(mc):
            for b in range(start, start + count):
                rng = substream(mc.rng_seed, hyp, b)
                gamma0 = _cn(rng, RNG_BLOCK, var_target)
                gammas = _cn(rng, (RNG_BLOCK, cq.shape[0]), var_clutter)
                noise = _cn(rng, (RNG_BLOCK, n_rx), sigma2)
                r = gammas @ cq + noise
                if hyp == _H1:
                    r = r + gamma0[:, None] * s[None, :]
                if quantize:
                    r = quantize_adc_1bit(r)
                parts.append(r @ f.conj())
        out[hyp] = np.concatenate(parts)[: mc.n_trials]
    return out[_H0], out[_H1]


def _variance_with_stderr(z: np.ndarray) -> tuple[float, float]:
    p = np.abs(z - z.mean()) ** 2
    n = z.size
    var = float(p.sum() / (n - 1))
    return var, float(p.std(ddof=1) / math.sqrt(n))


def variance_ratio_estimate(z0: np.ndarray, z1: np.ndarray) -> McEstimate:
    """Var1/Var0 - 1 with a delta-method standard error (independent samples)."""
    v0, s0 = _variance_with_stderr(z0)
    v1, s1 = _variance_with_stderr(z1)
    ratio = v1 / v0
    stderr = ratio * math.sqrt((s0 / v0) ** 2 + (s1 / v1) ** 2)
    return McEstimate(
        ratio - 1.0,
        stderr,
        min(z0.size, z1.size),
        {"var_h0": v0, "var_h0_stderr": s0, "var_h1": v1, "var_h1_stderr": s1},
    )


def theoretical_h0_variance(f, x, ch: RadarChannel, cfg: SystemConfig, adc: AdcMode | str = AdcMode.ONE_BIT) -> float:
    """Var(z | H0) predicted by the linearized model (1-bit) or exactly (infinite resolution)."""
    f_vec = _vec(f)
    energy = float(np.vdot(f_vec, f_vec).real)
    if AdcMode(adc) is AdcMode.ONE_BIT:
        return 2.0 * energy + clutter_power_h0(f_vec, x, ch, cfg)
    cq = clutter_returns(x, ch)
    clutter = sum(c * abs(np.vdot(f_vec, g)) ** 2 for c, g in zip(cfg.clutter_cnrs, cq))
    return cfg.radar_noise_power * (energy + clutter)


def theoretical_scnr(f, x, ch: RadarChannel, cfg: SystemConfig, adc: AdcMode | str = AdcMode.ONE_BIT) -> float:
    if AdcMode(adc) is AdcMode.ONE_BIT:
        return qscnr(f, x, ch, cfg)
    return scnr_infinite_bit(f, x, ch, cfg)


def mc_qscnr(
    x, f, ch: RadarChannel, cfg: SystemConfig, mc: McConfig, adc: AdcMode | str = AdcMode.ONE_BIT
) -> McEstimate:
    """Empirical (Q)SCNR; ``details`` also carries the theoretical H0 variance."""
    mc.require_statistical()
    z0, z1 = filter_outputs(x, f, ch, cfg, mc, adc)
    est = variance_ratio_estimate(z0, z1)
    extra = {"var_h0_ta": theoretical_h0_variance(f, x, ch, cfg, adc), "ta": theoretical_scnr(f, x, ch, cfg, adc)}
    return replace(est, details={**est.details, **extra})


@dataclass(frozen=True)
class RocPoint:
    delta: float
    pfa: McEstimate
    pd: McEstimate
    pd_ta: float
    threshold: float


def mc_roc(
    x,
    f,
    ch: RadarChannel,
    cfg: SystemConfig,
    deltas: Sequence[float],
    mc: McConfig,
    adc: AdcMode | str = AdcMode.ONE_BIT,
) -> list[RocPoint]:
    """Empirical false-alarm and detection rates at the analytic GLRT thresholds."""
    mc.require_statistical()
    for d in deltas:
        if not 0.0 < d < 1.0:
            raise ValueError(f"false-alarm target must lie in (0, 1), got {d}")
    var0 = theoretical_h0_variance(f, x, ch, cfg, adc)
    ta = theoretical_scnr(f, x, ch, cfg, adc)
    z0, z1 = filter_outputs(x, f, ch, cfg, mc, adc)
    a0, a1 = np.abs(z0), np.abs(z1)
    points = []
    for d in deltas:
        thr = math.sqrt(-var0 * math.log(d))
        points.append(
            RocPoint(
                delta=float(d),
                pfa=binomial_estimate(int(np.count_nonzero(a0 > thr)), a0.size),
                pd=binomial_estimate(int(np.count_nonzero(a1 > thr)), a1.size),
                pd_ta=prob_detection(d, ta),
                threshold=thr,
            )
        )
    return points


@dataclass(frozen=True)
class BerPoint:
    snr_c_db: float
    ber: McEstimate | None
    sep: McEstimate | None
    sep_lower: float
    sep_upper: float
    sep_upper_raw: float
    mean_min_margin: float
    n_designs: int
    n_infeasible: int
    status: str
    # the user holding the smallest margin of each design, where the alpha_min bounds apply
    worst_sep: McEstimate | None = None
    worst_lower: float = math.nan
    worst_upper: float = math.nan


def _symbol_indices(seed: int, k: int, order: int, n_users: int) -> np.ndarray:
    # a fixed-size draw keeps user u's symbol identical for every user count
    return substream(seed, _SYMBOLS, k).integers(0, order, size=MAX_SYMBOL_USERS)[:n_users]


def _unit_noise(seed: int, k: int, n_users: int, n_noise: int) -> np.ndarray:
    return np.stack([_cn(substream(seed, _NOISE, k, u), n_noise, 1.0) for u in range(n_users)])


def mc_ber(
    problem: DesignProblem,
    snr_c_grid_db: Sequence[float],
    mc: McConfig,
    n_sym: int = 200,
    n_noise: int | None = None,
    designer: Callable[[DesignProblem], DesignResult] = solve_design,
) -> list[BerPoint]:
    """BER/SEP over a grid of communication SNRs, one design per symbol vector.

    QoD designs do not depend on the noise level, so each symbol vector is
    designed once and reused across the grid; QoS thresholds scale with sigma
    and are redesigned per point. Noise draws are shared across grid points.
    """
    mc.require_statistical()
    if n_sym < 1:
        raise ValueError("n_sym must be positive")
    n_noise = n_noise or max(500, -(-mc.n_trials // n_sym))
    cfg = problem.cfg
    order = cfg.modulation_order
    const = psk_constellation(order)
    n_users = problem.channels.h.shape[0]
    energy = cfg.power_budget

    def designed(k: int, point_cfg: SystemConfig):
        idx = _symbol_indices(mc.rng_seed, k, order, n_users)
        p = replace(problem, cfg=point_cfg, symbols=const.points[idx], radar=problem.radar)
        return idx, designer(p)

    shared = None
    if problem.kind is DesignKind.QOD:
        shared = [designed(k, cfg) for k in range(n_sym)]

    points = []
    for snr_db in snr_c_grid_db:
        sigma2 = energy / db_to_linear(snr_db)
        point_cfg = cfg.with_comm_snr_db(snr_db)
        runs = shared if shared is not None else [designed(k, point_cfg) for k in range(n_sym)]
        sym_err = bit_err = n_sym_total = 0
        lbs, ubs, ubs_raw, margins = [], [], [], []
        worst_err = worst_total = 0
        worst_lbs, worst_ubs = [], []
        n_bad = 0
        for k, (idx, res) in enumerate(runs):
            if not res.feasible:
                n_bad += 1
                continue
            x = res.x.x
            noiseless = problem.channels.h.conj() @ x
            y = noiseless[:, None] + math.sqrt(sigma2) * _unit_noise(mc.rng_seed, k, n_users, n_noise)
            decided = decode_psk(y, const)
            sent = np.broadcast_to(idx[:, None], decided.shape)
            sym_err += int(np.count_nonzero(decided != sent))
            bit_err += int(const.bit_errors(sent, decided).sum())
            n_sym_total += decided.size
            rot = rotate_channels(problem.channels, const.points[idx]).rotated
            alpha = safe_margins(rot, x, order)
            lb = gaussian_tail(sep_bound_argument(alpha, math.sqrt(sigma2), order))
            lbs.append(lb)
            ubs.append(np.minimum(1.0, 2.0 * lb))
            ubs_raw.append(2.0 * lb)
            margins.append(float(alpha.min()))
            w = int(np.argmin(alpha))
            worst_err += int(np.count_nonzero(decided[w] != idx[w]))
            worst_total += decided.shape[1]
            worst_lbs.append(float(lb[w]))
            worst_ubs.append(min(1.0, 2.0 * float(lb[w])))
        if n_sym_total == 0:
            points.append(BerPoint(float(snr_db), None, None, math.nan, math.nan, math.nan, math.nan, 0, n_bad, "Infeasible"))
            continue
        bits = const.bits_per_symbol
        points.append(
            BerPoint(
                snr_c_db=float(snr_db),
                ber=binomial_estimate(bit_err, n_sym_total * bits),
                sep=binomial_estimate(sym_err, n_sym_total),
                sep_lower=float(np.mean(lbs)),
                sep_upper=float(np.mean(ubs)),
                sep_upper_raw=float(np.mean(ubs_raw)),
                mean_min_margin=float(np.mean(margins)),
                n_designs=len(lbs),
                n_infeasible=n_bad,
                status="Ok" if n_bad == 0 else "PartiallyInfeasible",
                worst_sep=binomial_estimate(worst_err, worst_total),
                worst_lower=float(np.mean(worst_lbs)),
                worst_upper=float(np.mean(worst_ubs)),
            )
        )
    return points

