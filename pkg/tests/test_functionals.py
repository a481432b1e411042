"""Energy functionals, flat derivatives and the regularized objective."""

import math

import numpy as np
import pytest

from frflow import (
    GridMismatchError,
    LinearPotential,
    MeanFieldLearner,
    MeasureError,
    QuadraticInteraction,
    RegularizedEnergy,
    ZeroEnergy,
    build_functional,
    build_grid,
    convexity_check,
    drift_a,
    eval_F,
    eval_V,
    flat_derivative,
    flat_derivative_defcheck,
    gaussian_measure,
    random_warm_start,
)


@pytest.fixture()
def f_lin(grid):
    return LinearPotential(grid, grid.x)


@pytest.fixture()
def f_xy(grid):
    return QuadraticInteraction(grid, np.outer(grid.x, grid.x))


@pytest.fixture()
def f_psd(grid):
    t = np.tanh(grid.x)
    return QuadraticInteraction(grid, 0.1 * np.outer(t, t))


# ---------------------------------------------------------------------------
# values


def test_zero_energy(grid, m_gauss11):
    F = ZeroEnergy(grid)
    value, flat = F.value_and_flat(m_gauss11)
    assert value == 0.0
    assert np.all(flat == 0.0)
    assert F.bound_C == 0.0


def test_linear_value_is_first_moment(f_lin, m_gauss11):
    assert abs(eval_F(f_lin, m_gauss11) - 1.0) <= 1e-6


def test_interaction_value_is_half_mean_squared(f_xy, m_gauss11):
    assert abs(eval_F(f_xy, m_gauss11) - 0.5) <= 1e-6


# ---------------------------------------------------------------------------
# flat derivatives


def test_linear_flat_derivative_recenters(grid, f_lin):
    m = gaussian_measure(grid, 0.0, 1.0)
    np.testing.assert_allclose(flat_derivative(f_lin, m), grid.x, atol=1e-6)


def test_interaction_flat_derivative(grid, f_xy, m_gauss11):
    np.testing.assert_allclose(flat_derivative(f_xy, m_gauss11),
                               grid.x - 1.0, atol=1e-5)


@pytest.mark.parametrize("name", ["zero", "linear:tanh", "interaction:tanh-psd",
                                  "learner:7"])
def test_flat_derivative_has_zero_mean(grid, pi, name):
    F = build_functional(grid, name)
    rng = np.random.default_rng(11)
    for _ in range(3):
        m = random_warm_start(grid, pi, rng)
        flat = flat_derivative(F, m)
        assert abs(np.dot(grid.weights, flat * m.density)) <= 1e-12
        assert np.max(np.abs(flat)) <= F.bound_C + 1e-10


def test_observed_derivative_max_tracks(grid, f_lin, m_gauss11):
    assert f_lin.observed_derivative_max == 0.0
    flat_derivative(f_lin, m_gauss11)
    seen = f_lin.observed_derivative_max
    assert 0.0 < seen <= f_lin.bound_C + 1e-10
    flat_derivative(f_lin, m_gauss11)
    assert f_lin.observed_derivative_max == seen


# ---------------------------------------------------------------------------
# derivative definition check


def test_defcheck_zero_energy(grid, m_gauss11, pi):
    assert flat_derivative_defcheck(ZeroEnergy(grid), m_gauss11, pi, 16) <= 1e-15


def test_defcheck_linear_is_exact(grid, f_lin, m_gauss11, pi):
    assert flat_derivative_defcheck(f_lin, m_gauss11, pi, 8) <= 1e-12


def test_defcheck_interaction(grid, f_xy, m_gauss11):
    m = gaussian_measure(grid, 0.0, 1.0)
    assert flat_derivative_defcheck(f_xy, m, m_gauss11, 64) <= 1e-8


def test_defcheck_learner(grid, pi, m_gauss11):
    F = build_functional(grid, "learner:7")
    assert flat_derivative_defcheck(F, m_gauss11, pi, 128) <= 1e-6


def test_defcheck_rejects_coarse_lambda_mesh(grid, f_lin, m_gauss11, pi):
    with pytest.raises(ValueError):
        flat_derivative_defcheck(f_lin, m_gauss11, pi, 7)


# ---------------------------------------------------------------------------
# convexity


def test_convexity_slack_vanishes_on_equal_pair(f_psd, m_gauss11):
    assert convexity_check(f_psd, m_gauss11, m_gauss11) == 0.0


def test_convexity_linear_is_tight(grid, f_lin, m_gauss11, pi):
    assert abs(convexity_check(f_lin, m_gauss11, pi)) <= 1e-12


@pytest.mark.parametrize("name", ["interaction:tanh-psd", "learner:7"])
def test_convexity_nonnegative_for_psd_energies(grid, pi, name):
    F = build_functional(grid, name)
    rng = np.random.default_rng(5)
    for _ in range(5):
        m = random_warm_start(grid, pi, rng)
        mp = random_warm_start(grid, pi, rng)
        assert convexity_check(F, m, mp) >= -1e-10


# ---------------------------------------------------------------------------
# construction errors


def test_interaction_rejects_asymmetric_kernel(grid):
    k = np.outer(grid.x, grid.x)
    k[0, 1] += 1e-6
    with pytest.raises(MeasureError):
        QuadraticInteraction(grid, k)


def test_interaction_rejects_bad_shape(grid):
    with pytest.raises(MeasureError):
        QuadraticInteraction(grid, np.eye(grid.n - 1))


def test_linear_rejects_nonfinite_potential(grid):
    f = np.array(grid.x, copy=True)
    f[0] = np.inf
    with pytest.raises(MeasureError):
        LinearPotential(grid, f)


def test_grid_mismatch_is_rejected(grid, f_lin):
    other = build_grid(-8.0, 8.0, 513)
    m = gaussian_measure(other, 0.0, 1.0)
    with pytest.raises(GridMismatchError):
        eval_F(f_lin, m)


def test_regularized_energy_rejects_bad_sigma(grid, pi_ref):
    with pytest.raises(MeasureError):
        RegularizedEnergy(F=ZeroEnergy(grid), pi=pi_ref, sigma=0.0)


def test_regularized_energy_rejects_grid_mismatch(pi_ref):
    other = build_grid(-8.0, 8.0, 513)
    with pytest.raises(GridMismatchError):
        RegularizedEnergy(F=ZeroEnergy(other), pi=pi_ref, sigma=1.0)


def test_learner_needs_matching_dataset_shapes(grid):
    feats = np.ones((4, grid.n))
    with pytest.raises(MeasureError):
        MeanFieldLearner(grid, feats, np.ones(3))


# ---------------------------------------------------------------------------
# regularized objective and drift


def test_eval_V_at_reference_is_zero(v_zero, pi):
    assert abs(eval_V(v_zero, pi)) <= 1e-12


def test_eval_V_is_scaled_kl_for_zero_energy(v_zero, m_gauss11):
    assert abs(eval_V(v_zero, m_gauss11) - 0.25) <= 1e-6


def test_eval_V_linear_at_reference(grid, pi_ref, pi, f_lin):
    v = RegularizedEnergy(F=f_lin, pi=pi_ref, sigma=1.0)
    assert abs(eval_V(v, pi)) <= 1e-6


def test_drift_vanishes_at_reference(v_zero, pi):
    assert np.max(np.abs(drift_a(v_zero, pi))) <= 1e-10


def test_drift_closed_form_for_mean_shift(grid, v_zero, m_gauss11):
    target = 0.5 * (grid.x - 0.5) - 0.25
    np.testing.assert_allclose(drift_a(v_zero, m_gauss11), target, atol=1e-5)


def test_drift_has_zero_mean_under_m(grid, pi, v_zero):
    rng = np.random.default_rng(23)
    for _ in range(5):
        m = random_warm_start(grid, pi, rng)
        a = drift_a(v_zero, m)
        assert abs(np.dot(grid.weights, a * m.density)) <= 1e-10


def test_drift_scales_with_sigma(grid, pi_ref, m_gauss11):
    v2 = RegularizedEnergy(F=ZeroEnergy(grid), pi=pi_ref, sigma=2.0)
    v1 = RegularizedEnergy(F=ZeroEnergy(grid), pi=pi_ref, sigma=1.0)
    np.testing.assert_allclose(drift_a(v2, m_gauss11),
                               4.0 * drift_a(v1, m_gauss11), rtol=1e-12)
