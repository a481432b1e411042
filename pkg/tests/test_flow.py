"""Birth-death integrators, trace recording and the path-space iteration."""

import math

import numpy as np
import pytest

from frflow import (
    FlowConfig,
    FlowState,
    FlowTrace,
    PositivityError,
    QuadraticInteraction,
    RegularizedEnergy,
    TraceError,
    ZeroDensityError,
    gaussian_measure,
    geometric_mixture,
    measure_from_density,
    oracle_flow_F0,
    picard_solve,
    run_flow,
    step_euler,
    step_exponential,
    tv,
    tv_path_distance,
)


@pytest.fixture()
def v_int(grid, pi_ref):
    t = np.tanh(grid.x)
    return RegularizedEnergy(F=QuadraticInteraction(grid, 0.1 * np.outer(t, t)),
                             pi=pi_ref, sigma=1.0)


# ---------------------------------------------------------------------------
# single steps


@pytest.mark.parametrize("dt", [1e-3, 0.37, 5.0])
def test_exponential_step_is_exact_without_energy(v_zero, pi, m_gauss11, dt):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    out = step_exponential(v_zero, state, dt)
    lam = math.exp(-0.5 * dt)
    target = geometric_mixture(m_gauss11, pi, lam)
    np.testing.assert_allclose(out.m.density, target.density, atol=1e-12)


def test_exponential_step_fixes_reference(v_zero, pi):
    state = FlowState.create(v_zero, pi, 0.0)
    out = step_exponential(v_zero, state, 0.1)
    np.testing.assert_allclose(out.m.density, pi.density, rtol=1e-14)


def test_exponential_local_error_is_second_order(v_int, m_gauss11):
    # one step of dt vs two of dt/2 differ at O(dt^2)
    state = FlowState.create(v_int, m_gauss11, 0.0)

    def gap(dt):
        one = step_exponential(v_int, state, dt)
        half = step_exponential(v_int, step_exponential(v_int, state, 0.5 * dt),
                                0.5 * dt)
        return tv(one.m, half.m)

    assert 3.2 <= gap(0.1) / gap(0.05) <= 4.8


def test_euler_step_fixes_reference(v_zero, pi):
    state = FlowState.create(v_zero, pi, 0.0)
    out = step_euler(v_zero, state, 0.1)
    np.testing.assert_allclose(out.m.density, pi.density, rtol=1e-14)


def test_euler_matches_exponential_for_small_steps(v_zero, m_gauss11):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    a = step_exponential(v_zero, state, 1e-4)
    b = step_euler(v_zero, state, 1e-4)
    assert tv(a.m, b.m) <= 1e-6


def test_euler_positivity_guard(grid, v_zero):
    m_far = gaussian_measure(grid, 3.0, 0.4)
    state = FlowState.create(v_zero, m_far, 0.0)
    dt = 1.5 / np.max(np.abs(state.drift))
    with pytest.raises(PositivityError):
        step_euler(v_zero, state, dt)


@pytest.mark.parametrize("stepper", [step_exponential, step_euler])
def test_steps_reject_nonpositive_dt(v_zero, m_gauss11, stepper):
    state = FlowState.create(v_zero, m_gauss11, 0.0)
    with pytest.raises(ValueError):
        stepper(v_zero, state, 0.0)


# ---------------------------------------------------------------------------
# config validation


def test_flow_config_rejects_unknown_integrator(v_zero, m_gauss11):
    with pytest.raises(ValueError):
        FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=1.0, integrator="rk4")


def test_flow_config_rejects_dt_above_t_end(v_zero, m_gauss11):
    with pytest.raises(ValueError):
        FlowConfig(V=v_zero, m0=m_gauss11, dt=2.0, t_end=1.0)


def test_flow_config_rejects_zero_density_start(grid, v_zero):
    m0 = measure_from_density(grid, np.where(grid.x > 0.0, 1.0, 0.0))
    with pytest.raises(ZeroDensityError):
        FlowConfig(V=v_zero, m0=m0, dt=1e-3, t_end=1.0)


# ---------------------------------------------------------------------------
# trajectories


def test_flow_matches_analytic_solution(grid, v_zero, pi, m_gauss11):
    trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=1.0,
                                record_every=10))
    worst = 0.0
    for t_k, dens in zip(trace.column("t"), trace.densities):
        ref = oracle_flow_F0(m_gauss11, pi, 1.0, t_k)
        worst = max(worst, float(np.dot(grid.weights,
                                        np.abs(dens - ref.density))))
    assert worst <= 1e-10


def test_flow_records_are_normalized_and_monotone(grid, v_int, m_gauss11):
    trace = run_flow(FlowConfig(V=v_int, m0=m_gauss11, dt=1e-3, t_end=0.5,
                                record_every=10))
    v = trace.column("V")
    assert np.all(np.diff(v) <= 1e-12)
    for dens in trace.densities:
        assert abs(np.dot(grid.weights, dens) - 1.0) <= 1e-10


def test_flow_gap_column_needs_m_star(v_zero, m_gauss11, pi):
    trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=0.1,
                                record_every=10))
    assert np.all(np.isnan(trace.column("gap")))
    trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=0.1,
                                record_every=10), m_star=pi)
    gap = trace.column("gap")
    assert np.all(np.isfinite(gap)) and np.all(gap >= -1e-10)


def test_euler_trajectory_is_first_order(grid, v_zero, pi, m_gauss11):
    def final_err(dt):
        trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=dt, t_end=0.5,
                                    record_every=10**9, integrator="euler"))
        m_fin = measure_from_density(grid, trace.densities[-1])
        return tv(m_fin, oracle_flow_F0(m_gauss11, pi, 1.0, 0.5))

    ratio = final_err(2e-3) / final_err(1e-3)
    assert 1.8 <= ratio <= 2.2


def test_record_times_are_exact_multiples(v_zero, m_gauss11):
    trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=0.05,
                                record_every=5))
    t = trace.column("t")
    np.testing.assert_array_equal(t, np.arange(11) * 5e-3)


def test_trace_validate_rejects_bad_times(v_zero, m_gauss11):
    trace = run_flow(FlowConfig(V=v_zero, m0=m_gauss11, dt=1e-3, t_end=0.01,
                                record_every=1))
    broken = FlowTrace(sigma=1.0, flow_kind="birth_death",
                       records=[trace.records[0], trace.records[0]],
                       densities=[])
    with pytest.raises(TraceError):
        broken.validate()


# ---------------------------------------------------------------------------
# analytic oracle


def test_oracle_endpoints(grid, pi, m_gauss11):
    assert oracle_flow_F0(m_gauss11, pi, 1.0, 0.0) is m_gauss11
    far = oracle_flow_F0(m_gauss11, pi, 1.0, 100.0)
    assert 2.0 * tv(far, pi) <= 1e-12
    mid = oracle_flow_F0(m_gauss11, pi, 1.0, 2.0 * math.log(2.0))
    target = gaussian_measure(grid, 0.5, 1.0)
    np.testing.assert_allclose(mid.density, target.density, atol=1e-8)


def test_oracle_rejects_negative_time(pi, m_gauss11):
    with pytest.raises(ValueError):
        oracle_flow_F0(m_gauss11, pi, 1.0, -0.1)


# ---------------------------------------------------------------------------
# path utilities


def test_tv_path_distance_constant_paths(grid, pi, m_gauss11):
    times = np.linspace(0.0, 2.0, 9)
    d = tv(m_gauss11, pi)
    path_a = [m_gauss11] * 9
    path_b = [pi] * 9
    assert tv_path_distance(path_a, path_a, times) == 0.0
    assert abs(tv_path_distance(path_a, path_b, times) - 2.0 * d) <= 1e-12


def test_tv_path_distance_rejects_length_mismatch(pi, m_gauss11):
    with pytest.raises(ValueError):
        tv_path_distance([pi], [pi, m_gauss11], np.array([0.0, 1.0]))


# ---------------------------------------------------------------------------
# fixed-point path iteration


def test_picard_collapses_without_energy(v_zero, m_gauss11):
    res = picard_solve(v_zero, m_gauss11, 1.0, 64, 4)
    # the first application already lands on the analytic path
    assert res.tv_T_distances[1] <= 1e-10


def test_picard_from_reference_stays_put(v_zero, pi):
    res = picard_solve(v_zero, pi, 1.0, 16, 2)
    for path in res.iterates[1:]:
        assert max(tv(m, pi) for m in path) <= 1e-12


def test_picard_contracts_on_interaction(v_int, m_gauss11):
    res = picard_solve(v_int, m_gauss11, 1.0, 64, 8)
    d = res.tv_T_distances
    assert len(d) == 8
    assert all(b < a for a, b in zip(d[1:], d[2:]))
    assert res.tail_decreasing()
    assert all(r < 1.0 for r in res.contraction_ratios[1:])


def test_picard_endpoint_matches_integrated_flow(grid, v_int, m_gauss11):
    res = picard_solve(v_int, m_gauss11, 1.0, 64, 8)
    ref = run_flow(FlowConfig(V=v_int, m0=m_gauss11, dt=1.0 / 2048, t_end=1.0,
                              record_every=2048))
    m_ref = measure_from_density(grid, ref.densities[-1])
    assert tv(res.iterates[-1][-1], m_ref) <= 1e-5


@pytest.mark.parametrize("kwargs", [dict(T=0.0), dict(n_time=4),
                                    dict(n_iters=1)])
def test_picard_rejects_degenerate_meshes(v_zero, m_gauss11, kwargs):
    args = dict(T=1.0, n_time=16, n_iters=2)
    args.update(kwargs)
    with pytest.raises(ValueError):
        picard_solve(v_zero, m_gauss11, args["T"], args["n_time"],
                     args["n_iters"])
