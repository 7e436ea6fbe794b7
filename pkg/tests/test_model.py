import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebit_isac.model import (
    CommChannels,
    SystemConfig,
    draw_comm_channels,
    is_on_alphabet,
    psk_constellation,
    quantize_adc_1bit,
    quantize_dac_1bit,
    radar_channel,
    rotate_channels,
    steering_vector,
)

from oracles import outer_loop, steering_loop


def test_broadside_steering_is_flat():
    np.testing.assert_allclose(steering_vector(0.0, 4), np.full(4, 0.5))


def test_endfire_steering_alternates():
    np.testing.assert_allclose(steering_vector(math.pi / 2, 2), np.array([1, -1]) / math.sqrt(2), atol=1e-15)


def test_steering_matches_scalar_loop():
    theta = math.radians(10.0)
    a = steering_vector(theta, 128)
    np.testing.assert_allclose(a, steering_loop(theta, 128), rtol=0, atol=1e-14)
    assert np.linalg.norm(a) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert cmath.phase(a[3] * math.sqrt(128)) == pytest.approx(-3 * math.pi * math.sin(theta), abs=1e-12)


def test_steering_rejects_empty_array():
    with pytest.raises(ValueError):
        steering_vector(0.1, 0)


def test_radar_channel_broadside_and_rank():
    cfg = SystemConfig(n_tx=2, n_rx=2, target_angle=0.0)
    np.testing.assert_allclose(radar_channel(0.0, cfg), np.full((2, 2), 0.5))
    g = radar_channel(0.7, SystemConfig(n_tx=5, n_rx=7))
    assert np.linalg.matrix_rank(g) == 1


def test_radar_channel_matches_outer_product_loop():
    cfg = SystemConfig(n_tx=4, n_rx=4)
    theta = math.radians(30.0)
    expect = outer_loop(steering_loop(theta, 4), steering_loop(theta, 4))
    np.testing.assert_allclose(radar_channel(theta, cfg), expect, atol=1e-15)


def test_dac_examples():
    cfg = SystemConfig(n_tx=1, power_budget=2.0)
    np.testing.assert_allclose(quantize_dac_1bit(np.array([0.3 - 2.1j]), cfg).x, [1 - 1j])
    cfg2 = SystemConfig(n_tx=2, power_budget=1.0)
    out = quantize_dac_1bit(np.array([-0.1 + 0.1j, 5 - 5j]), cfg2).x
    np.testing.assert_allclose(out, 0.5 * np.array([-1 + 1j, 1 - 1j]))


def test_dac_ties_map_to_plus_one():
    cfg = SystemConfig(n_tx=2, power_budget=4.0)
    out = quantize_dac_1bit(np.array([0.0 + 0.0j, -0.0 - 1j]), cfg).x
    c = cfg.amplitude
    np.testing.assert_array_equal(out, [c + 1j * c, c - 1j * c])


def test_dac_rejects_wrong_length():
    with pytest.raises(ValueError):
        quantize_dac_1bit(np.ones(3), SystemConfig(n_tx=4))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32), st.integers(0, 2**32 - 1))
def test_dac_is_idempotent_and_on_alphabet(n, seed):
    cfg = SystemConfig(n_tx=n)
    r = np.random.default_rng(seed)
    x = quantize_dac_1bit(r.standard_normal(n) + 1j * r.standard_normal(n), cfg)
    assert is_on_alphabet(x.x, cfg)
    assert x.power == pytest.approx(cfg.power_budget)
    np.testing.assert_array_equal(quantize_dac_1bit(x.x, cfg).x, x.x)


def test_adc_examples():
    np.testing.assert_array_equal(quantize_adc_1bit(np.array([2 - 0.5j])), [1 - 1j])
    eps = 1e-300
    np.testing.assert_array_equal(quantize_adc_1bit(np.array([-eps - eps * 1j])), [-1 - 1j])
    np.testing.assert_array_equal(quantize_adc_1bit(np.array([0j])), [1 + 1j])


def test_channels_are_deterministic_and_shaped():
    cfg = SystemConfig()
    a = draw_comm_channels(cfg, np.random.default_rng(5)).h
    b = draw_comm_channels(cfg, np.random.default_rng(5)).h
    np.testing.assert_array_equal(a, b)
    assert a.shape == (4, 128)


def test_channel_entries_have_unit_power():
    cfg = SystemConfig(n_tx=1000, n_users=100, comm_noise_powers=(1.0,) * 100)
    h = draw_comm_channels(cfg, np.random.default_rng(0)).h
    assert np.mean(np.abs(h) ** 2) == pytest.approx(1.0, abs=0.02)


def test_rotation_examples():
    h = np.random.default_rng(1).standard_normal((4, 3)) + 0j
    ch = CommChannels(h=h)
    np.testing.assert_allclose(rotate_channels(ch, [1, 1, 1, 1]).rotated, h)
    np.testing.assert_allclose(rotate_channels(ch, [1j] * 4).rotated, 1j * h)
    qpsk = [1, 1j, -1, -1j]
    rot = rotate_channels(ch, qpsk).rotated
    for u, s in enumerate(qpsk):
        for n in range(3):
            assert rot[u, n] == pytest.approx(h[u, n] * s, abs=1e-15)


def test_rotation_rejects_zero_symbol():
    with pytest.raises(ValueError):
        rotate_channels(CommChannels(h=np.ones((2, 2))), [1, 0])


def test_gray_neighbours_differ_in_one_bit():
    for order in (2, 4, 8, 16):
        c = psk_constellation(order)
        m = np.arange(order)
        assert set(c.gray.tolist()) == set(range(order))
        assert np.all(c.bit_errors(m, (m + 1) % order) == 1)


def test_config_validation():
    with pytest.raises(ValueError):
        SystemConfig(modulation_order=6)
    with pytest.raises(ValueError):
        SystemConfig(n_users=2)  # noise list still has four entries
    with pytest.raises(ValueError):
        SystemConfig(clutter_cnrs=(1.0,))
    assert SystemConfig().with_users(2).n_users == 2
