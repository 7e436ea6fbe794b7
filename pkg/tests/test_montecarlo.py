import math
from dataclasses import replace

import numpy as np
import pytest

from onebit_isac import DesignProblem, McConfig, mc_ber, mc_qscnr, mc_roc
from onebit_isac.model import (
    CommChannels,
    SystemConfig,
    draw_comm_channels,
    quantize_dac_1bit,
    radar_channels,
    steering_vector,
)
from onebit_isac.montecarlo import filter_outputs, substream, variance_ratio_estimate
from onebit_isac.radar import receive_filter


def _matched(cfg, adc="OneBit"):
    ch = radar_channels(cfg)
    x = quantize_dac_1bit(steering_vector(cfg.target_angle, cfg.n_tx).conj(), cfg).x
    return x, receive_filter(x, ch, cfg, adc).f, ch


def _scaled(cfg, factor):
    return replace(cfg, radar_snr=cfg.radar_snr * factor, clutter_cnrs=tuple(c * factor for c in cfg.clutter_cnrs))


def test_no_target_gives_zero_qscnr():
    cfg = replace(SystemConfig(n_tx=8, n_rx=16), radar_snr=0.0)
    x, _, ch = _matched(SystemConfig(n_tx=8, n_rx=16))
    f = receive_filter(x, ch, SystemConfig(n_tx=8, n_rx=16)).f
    est = mc_qscnr(x, f, ch, cfg, McConfig(n_trials=20_000, rng_seed=1))
    assert abs(est.value) <= 4 * est.stderr


def test_variance_ratio_on_synthetic_gaussians():
    r = substream(7, 0)
    n = 200_000
    z0 = (r.standard_normal(n) + 1j * r.standard_normal(n)) / math.sqrt(2)
    z1 = math.sqrt(5) * (r.standard_normal(n) + 1j * r.standard_normal(n)) / math.sqrt(2)
    est = variance_ratio_estimate(z0, z1)
    assert abs(est.value - 4.0) <= 3 * est.stderr
    assert est.stderr == pytest.approx(5 * math.sqrt(2 / n), rel=0.05)


def test_outputs_do_not_depend_on_batch_size():
    cfg = SystemConfig(n_tx=8, n_rx=16)
    x, f, ch = _matched(cfg)
    a = filter_outputs(x, f, ch, cfg, McConfig(n_trials=5000, rng_seed=4, batch=1024))
    b = filter_outputs(x, f, ch, cfg, McConfig(n_trials=5000, rng_seed=4, batch=4096))
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u, v)
        assert u.size == 5000
    c = filter_outputs(x, f, ch, cfg, McConfig(n_trials=5000, rng_seed=5))
    assert not np.array_equal(a[0], c[0])


def test_infinite_resolution_mc_is_exact():
    cfg = SystemConfig(n_tx=16, n_rx=32)
    x, f, ch = _matched(cfg, "Infinite")
    est = mc_qscnr(x, f, ch, cfg, McConfig(n_trials=100_000, rng_seed=2), "Infinite")
    d = est.details
    assert abs(est.value - d["ta"]) <= 4 * est.stderr
    assert abs(d["var_h0"] - d["var_h0_ta"]) <= 4 * d["var_h0_stderr"]


def test_infinite_resolution_false_alarms_are_calibrated():
    cfg = SystemConfig(n_tx=8, n_rx=16)
    x, f, ch = _matched(cfg, "Infinite")
    for pt in mc_roc(x, f, ch, cfg, [0.01, 0.1, 0.3], McConfig(n_trials=100_000, rng_seed=6), "Infinite"):
        assert abs(pt.pfa.value - pt.delta) <= 3.5 * math.sqrt(pt.delta * (1 - pt.delta) / pt.pfa.n)
        assert abs(pt.pd.value - pt.pd_ta) <= 0.01


def test_one_bit_theory_holds_at_low_snr():
    # per-element powers around 1e-2: the linearised law applies up to O(1/N_R) terms
    cfg = _scaled(SystemConfig(n_tx=16, n_rx=64), 0.01)
    x, f, ch = _matched(cfg)
    est = mc_qscnr(x, f, ch, cfg, McConfig(n_trials=100_000, rng_seed=3))
    d = est.details
    assert abs(est.value - d["ta"]) <= 3 * est.stderr + 0.05 * d["ta"]
    assert abs(d["var_h0"] - d["var_h0_ta"]) <= 0.01 * d["var_h0_ta"]


def test_roc_is_monotone():
    cfg = SystemConfig(n_tx=8, n_rx=16)
    x, f, ch = _matched(cfg)
    pts = mc_roc(x, f, ch, cfg, [0.01, 0.05, 0.1, 0.3, 0.6], McConfig(n_trials=20_000, rng_seed=0))
    pfa = [p.pfa.value for p in pts]
    pd = [p.pd.value for p in pts]
    assert pfa == sorted(pfa) and pd == sorted(pd)
    assert all(p.pd.value >= p.pfa.value for p in pts)


def test_statistical_output_needs_enough_trials():
    cfg = SystemConfig(n_tx=4, n_rx=4)
    x, f, ch = _matched(cfg)
    with pytest.raises(ValueError):
        mc_qscnr(x, f, ch, cfg, McConfig(n_trials=999))
    with pytest.raises(ValueError):
        mc_roc(x, f, ch, cfg, [1.2], McConfig(n_trials=1000))


def _qod_problem(n_users=2, order=8):
    cfg = SystemConfig(n_tx=8, n_rx=16, n_users=n_users, comm_noise_powers=(1.0,) * n_users, modulation_order=order)
    h = draw_comm_channels(cfg, substream(0, 50)).h
    return DesignProblem("QodConstrained", cfg, CommChannels(h=h), np.ones(n_users), radar_threshold=10 ** 0.4)


def test_ber_sep_relations():
    pts = mc_ber(_qod_problem(), [0.0, 10.0], McConfig(n_trials=1000, rng_seed=0), n_sym=4)
    for pt in pts:
        ber, sep = pt.ber.value, pt.sep.value
        assert ber <= sep + 1e-15 <= 3 * ber + 1e-15
        assert pt.sep_lower <= pt.sep_upper <= 1.0
        assert pt.worst_lower <= pt.worst_upper
    assert pts[1].sep.value <= pts[0].sep.value


def test_noiseless_limit_has_no_errors():
    pts = mc_ber(_qod_problem(), [80.0], McConfig(n_trials=1000, rng_seed=0), n_sym=3)
    assert pts[0].mean_min_margin > 0
    assert pts[0].ber.value == 0.0 and pts[0].sep.value == 0.0


def test_ber_is_deterministic():
    run = lambda: mc_ber(_qod_problem(), [5.0], McConfig(n_trials=1000, rng_seed=9), n_sym=2)[0]
    a, b = run(), run()
    assert a.ber.value == b.ber.value and a.sep.value == b.sep.value
