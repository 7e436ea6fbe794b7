import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from onebit_isac.comm import SafeMarginCoeffs
from onebit_isac.model import SystemConfig, quantize_dac_1bit, radar_channels
from onebit_isac.optim import (
    BnbStatus,
    IlpInstance,
    LpStatus,
    enumerate_ilp,
    feasible_point_on_sphere,
    linear_surrogate,
    lp_relaxation,
    maximize_over_ball,
    min_norm_point,
    minorize_inverse_quadratic,
    realify,
    solve_bnb,
    to_complex,
    to_real,
)
from onebit_isac.optim.ilp import dumps, loads
from onebit_isac.radar import RadarMetric, qscnr_concentrated

from oracles import box_lp_oracle, two_stage_enumeration


def _sphere_point(rng, n, energy):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v * math.sqrt(energy) / np.linalg.norm(v)


def _random_instance(rng, n, k, amplitude=0.5, coupled=False):
    obj = rng.standard_normal(n)
    a = rng.standard_normal((k, n))
    # thresholds around the value of a random vertex keep a healthy share feasible
    z0 = amplitude * rng.choice([-1.0, 1.0], n)
    rhs = a @ z0 - rng.uniform(0, 1.0, k)
    coupling = None
    if coupled:
        coupling = np.where(rng.uniform(size=k) < 0.75, rng.uniform(0.5, 2.0, k), 0.0)
        coupling[0] = 1.0
    return IlpInstance(obj, a, rhs, amplitude, coupling)


# ------------------------------------------------------------------ surrogates


def test_surrogates_without_clutter():
    cfg = SystemConfig(n_tx=6, n_rx=5, clutter_cnrs=(), clutter_angles=())
    ch = radar_channels(cfg)
    x_t = quantize_dac_1bit(np.arange(6) + 1j, cfg).x
    mu = RadarMetric.for_adc(cfg).gain
    st1 = minorize_inverse_quadratic(x_t, ch, cfg)
    assert np.all(st1.m_tilde == 0)
    assert st1.const1 == pytest.approx(-mu * np.linalg.norm(ch.g0 @ x_t) ** 2)
    st2 = linear_surrogate(x_t, ch, cfg)
    assert st2.ell_max == 0.0
    np.testing.assert_allclose(st2.w_t, 2 * mu * ch.g0.conj().T @ ch.g0 @ x_t, atol=1e-13)


def test_largest_eigenvalue_matches_dense(rng):
    cfg = SystemConfig(n_tx=10, n_rx=12)
    ch = radar_channels(cfg)
    x_t = quantize_dac_1bit(rng.standard_normal(10) + 1j * rng.standard_normal(10), cfg).x
    st1 = minorize_inverse_quadratic(x_t, ch, cfg)
    assert st1.ell_max == pytest.approx(np.linalg.eigvalsh(st1.m_tilde)[-1], rel=1e-10)


@pytest.mark.parametrize("n_tx,n_rx", [(4, 6), (16, 64)])
def test_surrogate_sandwich(rng, n_tx, n_rx):
    cfg = SystemConfig(n_tx=n_tx, n_rx=n_rx)
    ch = radar_channels(cfg)
    x_t = quantize_dac_1bit(rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx), cfg).x
    st = linear_surrogate(x_t, ch, cfg)
    true_t = qscnr_concentrated(x_t, ch, cfg)
    assert st.quadratic(x_t) == pytest.approx(true_t, rel=1e-10)
    assert st.linear(x_t) == pytest.approx(true_t, rel=1e-10)
    for _ in range(200):
        x = _sphere_point(rng, n_tx, cfg.power_budget)
        true = qscnr_concentrated(x, ch, cfg)
        assert st.linear(x) <= st.quadratic(x) + 1e-8 * max(1.0, abs(true))
        assert st.quadratic(x) <= true + 1e-8 * max(1.0, abs(true))


# ------------------------------------------------------------------ real lifting


def test_realify_identity(rng):
    for _ in range(10_000 // 100):
        w = rng.standard_normal((100, 7)) + 1j * rng.standard_normal((100, 7))
        x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        inst = realify(w[0].conj(), w.conj(), np.zeros(100), 1.0)
        z = to_real(x)
        assert abs(np.vdot(w[0], x).real - inst.objective @ z) <= 1e-12
        np.testing.assert_allclose(inst.constraint_matrix @ z, (w.conj() @ x).real, atol=1e-12)
    np.testing.assert_array_equal(to_complex(to_real(x)), x)


def test_realify_real_parts_only():
    w = np.array([1.0, -2.0, 0.5])
    x = np.array([0.3, 0.1, -4.0])
    inst = realify(w, np.zeros((0, 3)), [], 1.0)
    assert inst.objective @ to_real(x) == pytest.approx(w @ x)


def test_realify_safe_margin_row(rng):
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    k1 = SafeMarginCoeffs.for_order(8).kappa1
    inst = realify(np.zeros(4), (k1 * h.conj())[None, :], [0.0], 1.0)
    assert inst.constraint_matrix[0] @ to_real(x) == pytest.approx((k1 * np.vdot(h, x)).real, abs=1e-12)


def test_ilp_text_round_trip(rng, tmp_path):
    for coupled in (False, True):
        inst = _random_instance(rng, 6, 3, coupled=coupled)
        back = loads(dumps(inst))
        np.testing.assert_array_equal(back.objective, inst.objective)
        np.testing.assert_array_equal(back.constraint_matrix, inst.constraint_matrix)
        np.testing.assert_array_equal(back.rhs, inst.rhs)
        assert back.amplitude == inst.amplitude
        assert back.has_continuous == coupled
    with pytest.raises(ValueError, match="header"):
        loads("objective 1 2\n")
    with pytest.raises(ValueError, match="line 4"):
        loads("# onebit-isac ilp v1\namplitude 1\ncontinuous 0\nobjective 1 x\n")


def test_ilp_instance_validation():
    with pytest.raises(ValueError):
        IlpInstance(np.ones(2), np.ones((1, 2)), [0.0, 1.0], 1.0)
    with pytest.raises(ValueError):
        IlpInstance(np.ones(2), np.ones((1, 2)), [0.0], 0.0)
    with pytest.raises(ValueError):
        IlpInstance(np.ones(2), np.ones((1, 2)), [0.0], 1.0, coupling=[0.0])


# ------------------------------------------------------------------ LP relaxation


def test_lp_without_rows_hits_a_vertex():
    w = np.array([1.0, -2.0, 0.0, 3.5])
    res = lp_relaxation(IlpInstance(w, np.zeros((0, 4)), [], 0.25))
    assert res.status is LpStatus.OPTIMAL
    assert res.value == pytest.approx(0.25 * np.abs(w).sum())


def test_lp_single_row_forces_all_plus():
    n, c = 6, 0.3
    res = lp_relaxation(IlpInstance(-np.ones(n), np.ones((1, n)), [n * c], c))
    np.testing.assert_allclose(res.z, c)


def test_lp_matches_tableau_and_linprog(rng):
    checked = 0
    for trial in range(60):
        coupled = trial % 2 == 1
        inst = _random_instance(rng, int(rng.integers(2, 9)), int(rng.integers(1, 6)), coupled=coupled)
        res = lp_relaxation(inst)
        status, oracle = box_lp_oracle(inst.objective, inst.constraint_matrix, inst.rhs, inst.amplitude, inst.coupling)
        if status != "optimal":
            assert res.status is LpStatus.INFEASIBLE
            continue
        assert res.status is LpStatus.OPTIMAL
        assert res.value == pytest.approx(oracle, abs=1e-8)
        n = inst.n_vars
        c = np.concatenate([-inst.objective, [-1.0] if coupled else []])
        a_ub = -inst.constraint_matrix
        if coupled:
            a_ub = np.hstack([a_ub, inst.coupling[:, None]])
        bounds = [(-inst.amplitude, inst.amplitude)] * n + ([(None, None)] if coupled else [])
        ref = linprog(c, A_ub=a_ub, b_ub=-inst.rhs, bounds=bounds, method="highs")
        assert -ref.fun == pytest.approx(oracle, abs=1e-7)
        checked += 1
    assert checked >= 30


def test_lp_reports_infeasible():
    inst = IlpInstance(np.ones(2), np.array([[1.0, 1.0]]), [5.0], 1.0)
    assert lp_relaxation(inst).status is LpStatus.INFEASIBLE


# ------------------------------------------------------------------ branch and bound


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_bnb_without_rows_is_separable(seed, n):
    w = np.random.default_rng(seed).standard_normal(n)
    res = solve_bnb(IlpInstance(w, np.zeros((0, n)), [], 0.5))
    assert res.status is BnbStatus.OPTIMAL
    assert res.value == pytest.approx(0.5 * np.abs(w).sum())
    assert np.all(res.z * w >= 0)


def test_bnb_matches_enumeration(rng):
    for _ in range(30):
        inst = _random_instance(rng, int(rng.integers(2, 13)), int(rng.integers(1, 9)))
        res = solve_bnb(inst)
        _, best = enumerate_ilp(inst)
        if not np.isfinite(best):
            assert res.status is BnbStatus.INFEASIBLE
        else:
            assert res.status is BnbStatus.OPTIMAL
            assert res.value == pytest.approx(best, abs=1e-9)
            assert inst.is_feasible(res.z)


def test_bnb_coupled_matches_two_stage_oracle(rng):
    for _ in range(15):
        inst = _random_instance(rng, int(rng.integers(2, 11)), int(rng.integers(2, 7)), coupled=True)
        res = solve_bnb(inst)
        best, maximisers = two_stage_enumeration(inst.objective, inst.constraint_matrix, inst.rhs, inst.amplitude, inst.coupling)
        assert res.value == pytest.approx(best, abs=1e-9)
        assert res.lam == pytest.approx(inst.lambda_at(res.z), abs=1e-9)
        assert any(np.array_equal(res.z, z) for z in maximisers)


def test_bnb_node_limit_and_target(rng):
    inst = _random_instance(rng, 30, 6)
    limited = solve_bnb(inst, node_limit=3)
    assert limited.status in (BnbStatus.NODE_LIMIT, BnbStatus.OPTIMAL)
    if limited.status is BnbStatus.NODE_LIMIT:
        assert limited.nodes <= 3
        if limited.found:
            assert limited.bound >= limited.value - 1e-9
    full = solve_bnb(inst)
    if full.found:
        hit = solve_bnb(inst, target=full.value - 1.0)
        assert hit.found and hit.value >= full.value - 1.0


def test_bnb_infeasible_instance():
    inst = IlpInstance(np.ones(3), np.ones((1, 3)), [10.0], 1.0)
    res = solve_bnb(inst)
    assert res.status is BnbStatus.INFEASIBLE and not res.found


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_ilp(IlpInstance(np.ones(21), np.zeros((0, 21)), [], 1.0))


# ------------------------------------------------------------------ continuous subsolver


def test_ball_without_rows_aligns_with_objective(rng):
    w = rng.standard_normal(6)
    res = maximize_over_ball(w[None, :], [0.0], [1.0], 2.0)
    np.testing.assert_allclose(res.z, math.sqrt(2.0) * w / np.linalg.norm(w), atol=1e-6)


def test_ball_single_halfspace_closed_form():
    energy = 1.0
    w = np.array([1.0, 0.0])
    for angle in np.linspace(0.3, 2.8, 9):
        a = np.array([math.cos(angle), math.sin(angle)])
        b = 0.4
        res = maximize_over_ball(np.vstack([a, w]), [b, 0.0], [0.0, 1.0], energy)
        if a @ w >= b:
            expect = w
        else:
            perp = w - (w @ a) * a
            perp /= np.linalg.norm(perp)
            expect = b * a + math.sqrt(energy - b * b) * perp
        np.testing.assert_allclose(res.z, expect, atol=1e-6)
        assert a @ res.z >= b - 1e-9


def test_min_norm_point():
    a = np.array([[3.0, 4.0]])
    np.testing.assert_allclose(min_norm_point(a, np.array([10.0])), [1.2, 1.6], atol=1e-12)
    np.testing.assert_allclose(min_norm_point(a, np.array([-1.0])), [0.0, 0.0], atol=1e-12)
    assert min_norm_point(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])) is None


def test_feasible_point_on_sphere(rng):
    a = rng.standard_normal((3, 6))
    z = feasible_point_on_sphere(a, np.full(3, 0.2), 4.0)
    assert z @ z == pytest.approx(4.0)
    assert np.all(a @ z >= 0.2 - 1e-9)
    assert feasible_point_on_sphere(a[:1], [100.0], 1.0) is None
