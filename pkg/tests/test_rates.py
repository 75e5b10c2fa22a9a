import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_instance, random_vars
from secran.hermitian import block_diag, block_submatrix, logdet2, random_psd, varphi
from secran.optimizer import absorb_artificial_noise
from secran.rates import (
    DesignVariables,
    all_subsets,
    eavesdropper_rate,
    effective_noise_cov,
    evaluate_all,
    fronthaul_usage_gS,
    nonsecrecy_rate,
    per_ru_power,
    secrecy_rate_fk,
    surrogate_fk_tilde,
    surrogate_gS_tilde,
    weighted_secrecy_objective,
)
from secran.system import SystemConfig, fixed_channels

seeds = st.integers(0, 2**32 - 1)


def scalar(h1, h2, p1, p2, omega):
    config = SystemConfig(num_rus=1, num_ues=2)
    ch = fixed_channels(config, [np.array([[h1]]), np.array([[h2]])])
    v = DesignVariables(np.array([[[p1]], [[p2]]]), np.array([[omega]]))
    return config, ch, v


def test_effective_noise_examples():
    config, ch, v = scalar(1, 1, 0.7, 0.4, 0.3)
    assert effective_noise_cov(v, config, ch, 0, exclude_ue=0)[0, 0].real == pytest.approx(0.4 + 0.3 + 1)
    zero = DesignVariables.zeros(config)
    np.testing.assert_array_equal(effective_noise_cov(zero, config, ch, 1), config.noise_cov[1])


def test_secrecy_rate_examples():
    config, ch, v = scalar(1, 1, 0.7, 0.4, 0.3)
    assert secrecy_rate_fk(v, config, ch, 0) == pytest.approx(0.0, abs=1e-12)
    config, ch, v = scalar(1, 0, 1, 0, 1)
    assert secrecy_rate_fk(v, config, ch, 0) == pytest.approx(np.log2(1.5), abs=1e-12)
    assert nonsecrecy_rate(v, config, ch, 0) == pytest.approx(0.584963, abs=1e-6)
    assert secrecy_rate_fk(v, config, ch, 1) == 0.0
    assert nonsecrecy_rate(v, config, ch, 1) == 0.0


def test_fronthaul_and_power_examples():
    config, ch, v = scalar(1, 1, 0.6, 0.4, 1.0)
    assert fronthaul_usage_gS(v, config.blocks, (0,)) == pytest.approx(1.0, abs=1e-12)
    zero_r = DesignVariables(np.zeros((2, 1, 1)), np.array([[0.5]]))
    assert fronthaul_usage_gS(zero_r, config.blocks, (0,)) == 0.0
    assert per_ru_power(DesignVariables.zeros(config), config.blocks, 0) == 0.0
    c2 = SystemConfig(num_rus=1, num_ues=1, ru_antennas=2)
    v2 = DesignVariables(np.zeros((1, 2, 2)), np.eye(2))
    assert per_ru_power(v2, c2.blocks, 0) == 2.0


def test_weighted_objective_example():
    config = SystemConfig(num_rus=1, num_ues=1, weights=2.0)
    ch = fixed_channels(config, [np.array([[1.0]])])
    v = DesignVariables(np.array([[[1.0]]]), np.array([[1.0]]))
    assert weighted_secrecy_objective(v, config, ch) == pytest.approx(1.17, abs=1e-2)
    assert weighted_secrecy_objective(DesignVariables.zeros(config), config, ch) == 0.0


def test_zero_vars_report_is_all_zero():
    config = SystemConfig(num_rus=2, num_ues=2, ru_antennas=2)
    from secran.system import draw_realization
    rep = evaluate_all(DesignVariables.zeros(config), config, draw_realization(config, 0))
    assert not np.any(rep.f) and not np.any(rep.nonsecrecy_rate) and not np.any(rep.per_ru_power)
    assert all(g == 0.0 for g in rep.fronthaul_usage.values())
    assert rep.weighted_objective == 0.0


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_rate_identities(seed):
    rng = np.random.default_rng(seed)
    config, ch = random_instance(rng)
    v = random_vars(rng, config, with_phi=True)
    rep = evaluate_all(v, config, ch)
    np.testing.assert_array_equal(rep.secrecy_rate, np.maximum(rep.f, 0.0))
    assert np.all(rep.nonsecrecy_rate >= rep.f - 1e-12)
    for k in range(config.num_ues):
        eve = eavesdropper_rate(v, config, ch, k)
        assert eve >= -1e-12
        assert nonsecrecy_rate(v, config, ch, k) == pytest.approx(secrecy_rate_fk(v, config, ch, k) + eve, abs=1e-9)
    assert weighted_secrecy_objective(v, config, ch, clipped=True) >= weighted_secrecy_objective(
        v, config, ch, clipped=False) - 1e-12
    total = v.R_sum + v.Omega + v.Phi
    for i in range(config.num_rus):
        tr = np.trace(block_submatrix(total, config.blocks, (i,))).real
        assert abs(rep.per_ru_power[i] - tr) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_subset_additivity_under_block_diagonal_omega(seed):
    rng = np.random.default_rng(seed)
    config, ch = random_instance(rng)
    R = np.stack([random_psd(rng, config.n_r) for _ in range(config.num_ues)])
    Omega = block_diag([random_psd(rng, b) + 0.1 * np.eye(b) for b in config.blocks.block_sizes])
    v = DesignVariables(R, Omega)
    for S in all_subsets(config.num_rus):
        total = sum(fronthaul_usage_gS(v, config.blocks, (i,)) for i in S)
        assert abs(fronthaul_usage_gS(v, config.blocks, S) - total) <= 1e-9


def test_subset_count():
    assert [len(all_subsets(n)) for n in (1, 2, 3)] == [1, 3, 7]


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_surrogate_tangency_and_bounds(seed):
    rng = np.random.default_rng(seed)
    config, ch = random_instance(rng)
    old = random_vars(rng, config)
    new = random_vars(rng, config, scale=float(rng.uniform(0.1, 3.0)))
    for k in range(config.num_ues):
        f_old = secrecy_rate_fk(old, config, ch, k)
        assert abs(surrogate_fk_tilde(old, old, config, ch, k) - f_old) <= 1e-9
        assert surrogate_fk_tilde(new, old, config, ch, k) <= secrecy_rate_fk(new, config, ch, k) + 1e-9
        r_new = nonsecrecy_rate(new, config, ch, k)
        assert surrogate_fk_tilde(new, old, config, ch, k, secure=False) <= r_new + 1e-9
    for S in all_subsets(config.num_rus):
        assert abs(surrogate_gS_tilde(old, old, config.blocks, S) - fronthaul_usage_gS(old, config.blocks, S)) <= 1e-9
        assert surrogate_gS_tilde(new, old, config.blocks, S) >= fronthaul_usage_gS(new, config.blocks, S) - 1e-9


def test_surrogate_scalar_expansion():
    config, ch, old = scalar(0.8, 0.5, 0.7, 0.4, 0.3)
    _, _, new = scalar(0.8, 0.5, 1.1, 0.2, 0.6)
    p1, p2, w = 1.1, 0.2, 0.6
    q1, q2, w0 = 0.7, 0.4, 0.3
    h, g = 0.8**2, 0.5**2
    L = np.log2
    I_new, I_old = h * (p2 + w) + 1, h * (q2 + w0) + 1
    Tb_new, Tb_old = g * (p1 + p2 + w) + 1, g * (q1 + q2 + w0) + 1
    expect = (L(h * (p1 + p2 + w) + 1) - (L(I_old) + (I_new - I_old) / I_old / np.log(2))
              + L(g * (p2 + w) + 1) - (L(Tb_old) + (Tb_new - Tb_old) / Tb_old / np.log(2)))
    assert surrogate_fk_tilde(new, old, config, ch, 0) == pytest.approx(expect, abs=1e-12)
    g_expect = varphi(np.array([[p1 + p2 + w]]), np.array([[q1 + q2 + w0]])) - L(w)
    assert surrogate_gS_tilde(new, old, config.blocks, (0,)) == pytest.approx(g_expect, abs=1e-12)
    assert logdet2(np.array([[w]])) == pytest.approx(L(w))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_lemma1_absorption(seed):
    rng = np.random.default_rng(seed)
    config, ch = random_instance(rng)
    v = random_vars(rng, config, with_phi=True)
    a = absorb_artificial_noise(v)
    assert a.phi_blocks is None
    for k in range(config.num_ues):
        assert secrecy_rate_fk(a, config, ch, k) == pytest.approx(secrecy_rate_fk(v, config, ch, k), abs=1e-12)
    for i in range(config.num_rus):
        assert per_ru_power(a, config.blocks, i) == pytest.approx(per_ru_power(v, config.blocks, i), abs=1e-12)
    for S in all_subsets(config.num_rus):
        assert fronthaul_usage_gS(a, config.blocks, S) <= fronthaul_usage_gS(v, config.blocks, S) + 1e-12
    b = absorb_artificial_noise(a)
    np.testing.assert_array_equal(b.Omega, a.Omega)
    np.testing.assert_array_equal(b.R, a.R)


def test_absorb_zero_phi_is_identity(rng):
    config, _ = random_instance(rng)
    v = random_vars(rng, config)
    a = absorb_artificial_noise(v)
    np.testing.assert_array_equal(a.R, v.R)
    np.testing.assert_allclose(a.Omega, v.Omega, atol=0)


def test_single_ue_secrecy_is_nonsecrecy(rng):
    config = SystemConfig(num_rus=2, num_ues=1, ru_antennas=2)
    from secran.system import draw_realization
    ch = draw_realization(config, 3)
    v = random_vars(rng, config)
    assert secrecy_rate_fk(v, config, ch, 0) == nonsecrecy_rate(v, config, ch, 0)


def test_design_variables_validation():
    from secran.hermitian import DimensionMismatch
    with pytest.raises(DimensionMismatch):
        DesignVariables(np.zeros((1, 2, 2)), np.zeros((3, 3)))
    with pytest.raises(DimensionMismatch):
        DesignVariables(np.zeros((1, 2, 2)), np.zeros((2, 2)), (np.zeros((1, 1)),))
