"""Transport and hybrid comparison flows plus their dissipation accounting."""

import math

import numpy as np
import pytest

from frflow import (
    CFLError,
    FlowConfig,
    FlowState,
    ZeroDensityError,
    chi2,
    chi2_cfl_limit,
    chi2_flow_step,
    chi2_state,
    dissipation_split,
    gaussian_measure,
    kl,
    logsobolev_form,
    measure_from_density,
    run_comparison_flow,
    run_flow,
    solve_mstar,
    step_euler,
    tv,
    wasserstein_cfl_limit,
    wasserstein_step,
    wfr_step,
)
from frflow._backend import get_kernels

_k = get_kernels()


# ---------------------------------------------------------------------------
# transport flow


def test_wasserstein_reference_is_stationary(v_zero, pi):
    state = FlowState.create(v_zero, pi, 0.0)
    dt = 0.8 * wasserstein_cfl_limit(v_zero, state)
    out = wasserstein_step(v_zero, state, dt)
    assert tv(out.m, pi) <= 1e-12


def test_wasserstein_decreases_V(v_zero, m_gauss11):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    dt = 0.8 * wasserstein_cfl_limit(v_zero, state)
    n = int(math.ceil(0.05 / dt))
    trace = run_comparison_flow(v_zero, m_gauss11, "wasserstein", 0.05 / n,
                                0.05, max(1, n // 10))
    assert np.all(np.diff(trace.column("V")) <= 1e-10)


def test_wasserstein_cfl_guard(v_zero, m_gauss11):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    limit = wasserstein_cfl_limit(v_zero, state)
    with pytest.raises(CFLError):
        wasserstein_step(v_zero, state, 2.0 * limit)


def test_comparison_flow_rejects_unknown_kind(v_zero, m_gauss11):
    with pytest.raises(ValueError):
        run_comparison_flow(v_zero, m_gauss11, "heat", 1e-5, 1e-4, 1)


# ---------------------------------------------------------------------------
# chi-square flow


def test_chi2_reference_is_stationary(grid, pi_ref, pi):
    state = chi2_state(pi_ref, pi, 0.0)
    dt = 0.8 * chi2_cfl_limit(pi_ref, state)
    out = chi2_flow_step(pi_ref, state, dt)
    assert tv(out.m, pi) <= 1e-12


def test_chi2_energy_decreases(grid, pi_ref):
    m = gaussian_measure(grid, 0.5, 1.0)
    state = chi2_state(pi_ref, m, 0.0)
    values = [state.V_value]
    for _ in range(50):
        state = chi2_flow_step(pi_ref, state,
                               0.8 * chi2_cfl_limit(pi_ref, state))
        values.append(state.V_value)
    assert values[0] == chi2(m, pi_ref.measure)
    assert np.all(np.diff(values) < 0.0)


def test_chi2_cfl_guard(grid, pi_ref):
    m = gaussian_measure(grid, 0.5, 1.0)
    state = chi2_state(pi_ref, m, 0.0)
    with pytest.raises(CFLError):
        chi2_flow_step(pi_ref, state, 2.0 * chi2_cfl_limit(pi_ref, state))


def test_fixed_mobility_step_ignores_drift_shifts(grid, pi, m_gauss11):
    # only differences of the drift enter the flux
    abar = np.tanh(grid.x)
    mob = 0.5 * (pi.density[:-1] + pi.density[1:])
    dt = 1e-6
    a1, mn1 = _k.fv_step_fixed_mobility(m_gauss11.density, abar, mob, grid.h,
                                        grid.weights, dt)
    a2, mn2 = _k.fv_step_fixed_mobility(m_gauss11.density, abar + 5.3, mob,
                                        grid.h, grid.weights, dt)
    np.testing.assert_allclose(np.asarray(a1), np.asarray(a2), rtol=1e-12)


# ---------------------------------------------------------------------------
# hybrid flow


def test_wfr_reference_is_stationary(v_zero, pi):
    state = FlowState.create(v_zero, pi, 0.0)
    dt = 0.8 * wasserstein_cfl_limit(v_zero, state)
    out = wfr_step(v_zero, state, dt)
    assert tv(out.m, pi) <= 1e-12


def test_wfr_near_minimizer_stays_put(grid, pi_ref, pi):
    from frflow import QuadraticInteraction, RegularizedEnergy

    t = np.tanh(grid.x)
    v = RegularizedEnergy(F=QuadraticInteraction(grid, 0.1 * np.outer(t, t)),
                          pi=pi_ref, sigma=1.0)
    m_star = solve_mstar(v).m_star
    state = FlowState.create(v, m_star, 0.0)
    dt = 0.8 * wasserstein_cfl_limit(v, state)
    out = wfr_step(v, state, dt)
    assert tv(out.m, m_star) <= 1e-8


def test_wfr_splitting_order(v_zero, m_gauss11):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    limit = wasserstein_cfl_limit(v_zero, state)

    def order_gap(dt):
        ab = wfr_step(v_zero, state, dt)
        ba = wasserstein_step(v_zero, step_euler(v_zero, state, dt), dt)
        return tv(ab.m, ba.m)

    ratio = order_gap(0.4 * limit) / order_gap(0.2 * limit)
    assert 3.2 <= ratio <= 4.8


def test_wfr_dominates_plain_flow_at_matched_times(grid, v_zero, pi,
                                                   m_gauss11):
    m_star = solve_mstar(v_zero).m_star
    delta = 1e-2
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    n_sub = max(1, int(math.ceil(delta / (0.8 * wasserstein_cfl_limit(
        v_zero, state)))))
    wfr = run_comparison_flow(v_zero, m_gauss11, "wfr", delta / n_sub, 1.0,
                              n_sub, m_star=m_star)
    bd = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=1.0,
                             record_every=10), m_star=m_star)
    assert wfr.n_records == bd.n_records
    np.testing.assert_allclose(wfr.column("t"), bd.column("t"), atol=1e-12)
    assert np.max(wfr.column("gap") - bd.column("gap")) <= 1e-8


def test_wfr_split_terms_nonnegative_and_account_for_decay(v_zero,
                                                           m_gauss11):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    delta = 1e-2
    n_sub = max(1, int(math.ceil(delta / (0.8 * wasserstein_cfl_limit(
        v_zero, state)))))
    trace = run_comparison_flow(v_zero, m_gauss11, "wfr", delta / n_sub, 0.5,
                                n_sub)
    lang = trace.column("langevin_term")
    bd = trace.column("birth_death_term")
    assert np.min(lang) >= 0.0 and np.min(bd) >= 0.0
    t = trace.column("t")
    v = trace.column("V")
    diss = (lang + bd)[1:-1]
    dv = (v[2:] - v[:-2]) / (2.0 * (t[1] - t[0]))
    rel = np.abs(dv + diss) / np.maximum(np.abs(diss), 1e-12)
    assert np.max(rel) <= 5e-2


# ---------------------------------------------------------------------------
# dissipation split and log-Sobolev reporting


def test_dissipation_split_vanishes_at_reference(v_zero, pi):
    split = dissipation_split(v_zero, pi)
    assert abs(split.langevin_term) <= 1e-15
    assert abs(split.birth_death_term) <= 1e-15


def test_dissipation_split_mean_shift_values(v_zero, m_gauss11):
    # drift is affine with slope 1/2, so both channels integrate to 1/4
    split = dissipation_split(v_zero, m_gauss11)
    assert abs(split.langevin_term - 0.25) <= 1e-5
    assert abs(split.birth_death_term - 0.25) <= 1e-4


def test_logsobolev_form_at_reference(pi):
    lhs, rhs = logsobolev_form(pi, pi)
    assert lhs <= 1e-15 and rhs == 0.0


def test_logsobolev_form_mean_shift(pi, m_gauss11):
    lhs, rhs = logsobolev_form(m_gauss11, pi)
    assert abs(lhs - 1.0) <= 1e-4
    assert abs(rhs - 0.5) <= 1e-6
    assert abs(lhs / rhs - 2.0) <= 1e-3


def test_logsobolev_ratio_above_two_for_narrow_start(grid, pi):
    m = gaussian_measure(grid, 0.0, 0.8)
    lhs, rhs = logsobolev_form(m, pi)
    assert lhs / rhs >= 2.0 - 1e-3
    assert abs(rhs - kl(m, pi)) <= 1e-12


def test_logsobolev_form_rejects_zero_density(grid, pi):
    m = measure_from_density(grid, np.where(grid.x > 0.0, 1.0, 0.0))
    with pytest.raises(ZeroDensityError):
        logsobolev_form(m, pi)
