"""Grid discretizations of the Wasserstein, chi^2, and WFR flows.

All three are finite-volume schemes on the trapezoid cells (weights act as
cell volumes, so mass conservation is exact and boundary fluxes vanish):

* wasserstein_step: d/dt m = div(grad(a) m), upwind density at interfaces;
* chi2_flow_step:   d/dt m = div(grad(abar) pi), abar = 2(m/pi - 1) - chi2,
  with the fixed mobility pi averaged at interfaces;
* wfr_step: Lie splitting, one wasserstein_step followed by one Euler
  birth-death step.

dissipation_split separates the two WFR dissipation channels
(|grad a|^2 and |a|^2, both integrated against m).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _k
from .errors import CFLError, PositivityError, ZeroDensityError
from .flow import FlowState, FlowTrace, _trace_record, step_euler
from .functionals import RegularizedEnergy, eval_V
from .grid_measure import (
    GridMeasure,
    ReferenceMeasure,
    _finalize_measure,
    chi2,
    kl,
)

__all__ = [
    "WFRDissipation",
    "wasserstein_step",
    "chi2_flow_step",
    "wfr_step",
    "dissipation_split",
    "logsobolev_form",
    "wasserstein_cfl_limit",
    "chi2_cfl_limit",
    "run_comparison_flow",
]


@dataclass(frozen=True)
class WFRDissipation:
    """The two dissipation channels of the WFR flow at one time."""

    t: float
    langevin_term: float
    birth_death_term: float


def wasserstein_cfl_limit(V: RegularizedEnergy, state: FlowState) -> float:
    """Stability guard dt <= h^2 / (sigma^2 + 2 h max|grad a|)."""
    h = state.m.grid.h
    grad = _k.gradient_centered(state.drift, h)
    g_max = float(np.max(np.abs(grad)))
    return h * h / (V.sigma**2 + 2.0 * h * g_max)


def wasserstein_step(V: RegularizedEnergy, state: FlowState,
                     dt: float) -> FlowState:
    """Upwind finite-volume step for d/dt m = div(grad(a) m)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    limit = wasserstein_cfl_limit(V, state)
    if dt > limit:
        raise CFLError(f"dt={dt} exceeds the stability guard {limit}")
    grid = state.m.grid
    m_new, mn = _k.fv_step_upwind(state.m.density, state.drift, grid.h,
                                  grid.weights, dt)
    if mn < 0.0:
        raise PositivityError("transport step produced a negative density")
    m_new = np.asarray(m_new)
    with np.errstate(divide="ignore"):
        log_new = np.log(m_new)
    meas = _finalize_measure(grid, m_new, log_new)
    return FlowState.create(V, meas, state.t + dt)


def _chi2_drift(pi: ReferenceMeasure, m: GridMeasure) -> np.ndarray:
    ratio = m.density / pi.measure.density
    return 2.0 * (ratio - 1.0) - chi2(m, pi.measure)


def chi2_state(pi: ReferenceMeasure, m: GridMeasure, t: float) -> FlowState:
    """FlowState for the chi^2 flow: energy chi^2(m|pi), dissipation
    |grad abar|^2 integrated against pi."""
    abar = _chi2_drift(pi, m)
    grid = m.grid
    grad = _k.gradient_centered(abar, grid.h)
    diss = _k.a_norm_sq(grid.weights, grad, pi.measure.density)
    return FlowState(t=t, m=m, V_value=chi2(m, pi.measure), a_norm_sq=diss,
                     flat=np.zeros(grid.n), drift=abar)


def chi2_cfl_limit(pi: ReferenceMeasure, state: FlowState) -> float:
    """Guard dt <= h^2 / (4 + 2 h max|grad abar|) (diffusivity 2 in m/pi)."""
    h = state.m.grid.h
    grad = _k.gradient_centered(state.drift, h)
    g_max = float(np.max(np.abs(grad)))
    return h * h / (4.0 + 2.0 * h * g_max)


def chi2_flow_step(pi: ReferenceMeasure, state: FlowState,
                   dt: float) -> FlowState:
    """Finite-volume step for d/dt m = div(grad(abar) pi)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    limit = chi2_cfl_limit(pi, state)
    if dt > limit:
        raise CFLError(f"dt={dt} exceeds the stability guard {limit}")
    grid = state.m.grid
    pd = pi.measure.density
    mob_iface = 0.5 * (pd[:-1] + pd[1:])
    m_new, mn = _k.fv_step_fixed_mobility(state.m.density, state.drift,
                                          mob_iface, grid.h, grid.weights, dt)
    if mn < 0.0:
        raise PositivityError("chi2 flow step produced a negative density")
    m_new = np.asarray(m_new)
    with np.errstate(divide="ignore"):
        log_new = np.log(m_new)
    meas = _finalize_measure(grid, m_new, log_new)
    return chi2_state(pi, meas, state.t + dt)


def wfr_step(V: RegularizedEnergy, state: FlowState, dt: float) -> FlowState:
    """Lie splitting: transport substep, then birth-death Euler substep."""
    mid = wasserstein_step(V, state, dt)
    out = step_euler(V, mid, dt)
    return dataclasses.replace(out, t=state.t + dt)


def dissipation_split(V: RegularizedEnergy, m: GridMeasure,
                      t: float = 0.0) -> WFRDissipation:
    """Langevin (|grad a|^2) and birth-death (|a|^2) terms under m."""
    state = FlowState.create(V, m, t)
    grid = m.grid
    grad = _k.gradient_centered(state.drift, grid.h)
    lange = _k.a_norm_sq(grid.weights, grad, m.density)
    return WFRDissipation(t=t, langevin_term=lange,
                          birth_death_term=state.a_norm_sq)


def logsobolev_form(m: GridMeasure, pi: GridMeasure) -> tuple[float, float]:
    """(int |grad log(m/pi)|^2 dm, KL(m|pi)) for LSI ratio reporting."""
    if not (m.is_strictly_positive() and pi.is_strictly_positive()):
        raise ZeroDensityError("log-Sobolev form needs strictly positive inputs")
    grid = m.grid
    g = _k.gradient_centered(m.log_density - pi.log_density, grid.h)
    lhs = _k.a_norm_sq(grid.weights, g, m.density)
    return float(lhs), kl(m, pi)


def run_comparison_flow(V: RegularizedEnergy, m0: GridMeasure, flow: str,
                        dt: float, t_end: float, record_every: int,
                        m_star: GridMeasure | None = None) -> FlowTrace:
    """Drive one of {wasserstein, wfr} and record the standard trace rows.

    The langevin/birth-death split columns are filled at every record.  The
    plain birth-death flow is run via flow.run_flow instead.
    """
    if flow not in ("wasserstein", "wfr"):
        raise ValueError(f"unknown comparison flow {flow!r}")
    stepper = wasserstein_step if flow == "wasserstein" else wfr_step
    v_star = eval_V(V, m_star) if m_star is not None else np.nan
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    state = FlowState.create(V, m0, 0.0)
    trace = FlowTrace(sigma=V.sigma, flow_kind=flow)

    def record(st: FlowState) -> None:
        split = dissipation_split(V, st.m, st.t)
        trace.records.append(_trace_record(
            V, st, m_star, v_star,
            split=(split.langevin_term, split.birth_death_term),
        ))
        trace.densities.append(st.m.density)

    record(state)
    for k in range(1, n_steps + 1):
        state = stepper(V, state, dt)
        state = dataclasses.replace(state, t=k * dt)
        if k % record_every == 0 or k == n_steps:
            record(state)
    trace.validate()
    return trace
