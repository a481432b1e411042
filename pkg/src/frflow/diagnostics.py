"""Numerical certificates for the dissipation identity, PLI bounds,
quadratic growth, rate envelopes, and the KL/ratio envelopes.

All checks are report-generating and never modify the trajectory under test.
Trajectory-wide ratio extrema are *measured* from the recorded trace; the
conservative closed-form envelopes (R1 formula and its mirrored lower bound)
are reported alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels as _k
from .errors import RatioUnboundedError, TraceError
from .flow import FlowTrace
from .functionals import RegularizedEnergy, eval_V
from .grid_measure import GridMeasure, chi2, density_ratio_bounds, kl

__all__ = [
    "RatioBounds",
    "RateReport",
    "PliReport",
    "GeneralPliReport",
    "EnvelopeReport",
    "measure_ratio_bounds",
    "dissipation_check",
    "pli_check",
    "general_pli_check",
    "quadratic_growth_check",
    "rate_fit",
    "kl_bound_check",
    "ratio_envelope_check",
    "r1_formula",
    "R1_formula",
]


@dataclass(frozen=True)
class RatioBounds:
    """Warm-start and trajectory-wide density-ratio extrema.

    (r, R): m0/pi; (r_bar, R_bar): m0/m_star; the *1 variants are extrema
    over all recorded times of the trace.
    """

    r: float
    R: float
    r_bar: float
    R_bar: float
    r1: float
    R1: float
    r1_bar: float
    R1_bar: float

    def __post_init__(self):
        for lo, hi, tag in (
            (self.r, self.R, "r/R"),
            (self.r_bar, self.R_bar, "r_bar/R_bar"),
            (self.r1, self.R1, "r1/R1"),
            (self.r1_bar, self.R1_bar, "r1_bar/R1_bar"),
        ):
            if not (0.0 < lo <= hi):
                raise ValueError(f"ratio bounds {tag} must satisfy 0 < lo <= hi")


def _trajectory_extrema(trace: FlowTrace, against: GridMeasure,
                        lo_col: str, hi_col: str) -> tuple[float, float]:
    lo = trace.column(lo_col)
    hi = trace.column(hi_col)
    if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        return float(np.min(lo)), float(np.max(hi))
    if not trace.densities:
        raise TraceError(f"trace carries neither {lo_col} columns nor densities")
    lo_v, hi_v = np.inf, -np.inf
    for dens in trace.densities:
        a, b, ok = _k.ratio_minmax(dens, against.density)
        if not ok:
            raise RatioUnboundedError("recorded density not dominated")
        lo_v = min(lo_v, a)
        hi_v = max(hi_v, b)
    return float(lo_v), float(hi_v)


def measure_ratio_bounds(trace: FlowTrace, m0: GridMeasure, pi: GridMeasure,
                         m_star: GridMeasure) -> RatioBounds:
    r, big_r = density_ratio_bounds(m0, pi)
    r_bar, big_r_bar = density_ratio_bounds(m0, m_star)
    r1, big_r1 = _trajectory_extrema(trace, pi, "ratio_min_pi", "ratio_max_pi")
    r1_bar, big_r1_bar = _trajectory_extrema(trace, m_star,
                                             "ratio_min_mstar",
                                             "ratio_max_mstar")
    return RatioBounds(r=r, R=big_r, r_bar=r_bar, R_bar=big_r_bar,
                       r1=r1, R1=big_r1, r1_bar=r1_bar, R1_bar=big_r1_bar)


def dissipation_check(V: RegularizedEnergy, trace: FlowTrace) -> float:
    """Max relative error of (V_{k+1}-V_{k-1})/(2 Delta) vs -a_norm_sq_k."""
    t = trace.column("t")
    if t.size < 5:
        raise TraceError(f"need >= 5 records for the dissipation check, "
                         f"got {t.size}")
    deltas = np.diff(t)
    delta = float(np.mean(deltas))
    if np.max(np.abs(deltas - delta)) > 1e-9 * delta:
        raise TraceError("dissipation check needs uniformly spaced records")
    v = trace.column("V")
    ansq = trace.column("a_norm_sq")
    dv = (v[2:] - v[:-2]) / (2.0 * delta)
    denom = np.maximum(np.abs(ansq[1:-1]), 1e-12)
    return float(np.max(np.abs(dv + ansq[1:-1]) / denom))


@dataclass(frozen=True)
class PliReport:
    """Per-record slacks of the flat PLI with measured constants."""

    slacks: np.ndarray
    r1_bar: float
    R1_bar: float
    constant: float  # 4 R1_bar / (sigma^2 r1_bar)
    passed: bool

    @property
    def worst_slack(self) -> float:
        return float(np.min(self.slacks))


def pli_check(V: RegularizedEnergy, trace: FlowTrace,
              m_star: GridMeasure) -> PliReport:
    """slack_k = (4 R1_bar/(sigma^2 r1_bar)) a_norm_sq_k - gap_k >= -1e-8."""
    r1_bar, big_r1_bar = _trajectory_extrema(trace, m_star,
                                             "ratio_min_mstar",
                                             "ratio_max_mstar")
    const = 4.0 * big_r1_bar / (V.sigma**2 * r1_bar)
    gap = trace.column("gap")
    if not np.all(np.isfinite(gap)):
        v_star = eval_V(V, m_star)
        gap = trace.column("V") - v_star
    slacks = const * trace.column("a_norm_sq") - gap
    return PliReport(slacks=slacks, r1_bar=r1_bar, R1_bar=big_r1_bar,
                     constant=const, passed=bool(np.min(slacks) >= -1e-8))


@dataclass(frozen=True)
class GeneralPliReport:
    slack: float
    chi2_slack: float
    cauchy_schwarz_slack: float
    r: float
    R: float
    lam: float

    def passed(self, tol: float = 1e-8) -> bool:
        ok = self.slack >= -tol and self.cauchy_schwarz_slack >= -tol
        if np.isfinite(self.chi2_slack):
            ok = ok and self.chi2_slack >= -tol
        return ok


def general_pli_check(g_eval, g_flat, m_star: GridMeasure, m: GridMeasure,
                      lam: float, chi2_growth: bool = False) -> GeneralPliReport:
    """PLI from the KL growth condition: gap <= (2R/(lam r)) ||dG/dm||^2.

    g_eval/g_flat evaluate G and its recentred flat derivative.  The caller
    asserts the growth hypothesis gap >= lam KL(.|m_star) (and optionally the
    chi^2-growth variant, enabling the sharper (1/lam) bound).  The
    Cauchy-Schwarz intermediate gap <= ||dG/dm|| chi2(m_star|m)^{1/2} is
    evaluated as a separate slack.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    r, big_r = density_ratio_bounds(m, m_star)
    gap = g_eval(m) - g_eval(m_star)
    dg = g_flat(m)
    norm_sq = _k.a_norm_sq(m.grid.weights, dg, m.density)
    slack = (2.0 * big_r / (lam * r)) * norm_sq - gap
    chi2_slack = (norm_sq / lam - gap) if chi2_growth else np.nan
    cs_slack = math.sqrt(norm_sq) * math.sqrt(chi2(m_star, m)) - gap
    return GeneralPliReport(slack=float(slack), chi2_slack=float(chi2_slack),
                            cauchy_schwarz_slack=float(cs_slack),
                            r=r, R=big_r, lam=lam)


def quadratic_growth_check(V: RegularizedEnergy, m_star: GridMeasure,
                           samples: list[GridMeasure]) -> float:
    """min over samples of gap - (sigma^2/2) KL(m|m_star); >= -1e-8 passes."""
    v_star = eval_V(V, m_star)
    half_s2 = 0.5 * V.sigma**2
    worst = np.inf
    for m in samples:
        slack = (eval_V(V, m) - v_star) - half_s2 * kl(m, m_star)
        worst = min(worst, slack)
    return float(worst) if samples else 0.0


@dataclass(frozen=True)
class RateReport:
    kappa_theory: float
    kappa_fit: float
    lam: float
    window: tuple[float, float]
    envelope_holds: bool
    immediate_convergence: bool

    def passed(self) -> bool:
        if self.immediate_convergence:
            return True
        return self.envelope_holds and self.kappa_fit >= self.kappa_theory


def rate_fit(trace: FlowTrace, bounds: RatioBounds, sigma: float,
             window: tuple[float, float] | None = None) -> RateReport:
    """Fit -log(gap) vs t and compare with kappa = sigma^2 r_bar/(4 R_bar)."""
    kappa_theory = sigma**2 * bounds.r_bar / (4.0 * bounds.R_bar)
    t = trace.column("t")
    gap = trace.column("gap")
    if not np.all(np.isfinite(gap)):
        raise TraceError("rate fit needs the gap column (run with m_star)")
    t_end = t[-1]
    if window is None:
        window = (0.1 * t_end, 0.9 * t_end)
    gap0 = gap[0]
    if gap0 <= 1e-14:
        return RateReport(kappa_theory=kappa_theory, kappa_fit=np.nan,
                          lam=0.5 * sigma**2, window=window,
                          envelope_holds=True, immediate_convergence=True)
    envelope = gap <= gap0 * np.exp(-kappa_theory * t) * (1.0 + 1e-6)
    mask = (t >= window[0]) & (t <= window[1])
    floor = gap <= 1e-14
    if np.any(floor):
        mask &= t < t[np.argmax(floor)]
    if np.sum(mask) < 2:
        return RateReport(kappa_theory=kappa_theory, kappa_fit=np.nan,
                          lam=0.5 * sigma**2, window=window,
                          envelope_holds=bool(np.all(envelope)),
                          immediate_convergence=True)
    y = -np.log(gap[mask])
    slope = np.polyfit(t[mask], y, 1)[0]
    return RateReport(kappa_theory=kappa_theory, kappa_fit=float(slope),
                      lam=0.5 * sigma**2, window=window,
                      envelope_holds=bool(np.all(envelope)),
                      immediate_convergence=False)


def kl_bound_check(trace: FlowTrace, R: float, C: float, sigma: float) -> float:
    """Max over records of KL(m_t|pi) - (2 log R + 4C/sigma^2)."""
    bound = 2.0 * math.log(R) + 4.0 * C / sigma**2
    return float(np.max(trace.column("kl_pi") - bound))


def R1_formula(R: float, C: float, sigma: float) -> float:
    """Trajectory upper envelope 1 + exp(log R + C + (s^2/2)(2logR + 4C/s^2))."""
    kl_bound = 2.0 * math.log(R) + 4.0 * C / sigma**2
    return 1.0 + math.exp(math.log(R) + C + 0.5 * sigma**2 * kl_bound)


def r1_formula(r: float, C: float, sigma: float) -> float:
    """Mirrored lower envelope 1/(1 + exp(C - log r)).

    In the mirrored derivation the KL term carries a favorable sign and
    drops out, so the exponent is only C - log r; conservative by the same
    1 + exp(.) convention as the upper envelope.
    """
    return 1.0 / (1.0 + math.exp(C - math.log(r)))


@dataclass(frozen=True)
class EnvelopeReport:
    R1: float
    r1: float
    C_V: float
    max_upper_violation: float
    max_lower_violation: float
    passed: bool


def ratio_envelope_check(trace: FlowTrace, r: float, R: float, C: float,
                         sigma: float) -> EnvelopeReport:
    """Check r1 <= m_t/pi <= R1 at every record with the closed-form envelopes."""
    big_r1 = R1_formula(R, C, sigma)
    r1 = r1_formula(r, C, sigma)
    c_v = 3.0 * C + 0.5 * sigma**2 * (math.log(big_r1) + 2.0 * math.log(R))
    upper = float(np.max(trace.column("ratio_max_pi") - big_r1))
    lower = float(np.max(r1 - trace.column("ratio_min_pi")))
    return EnvelopeReport(R1=big_r1, r1=r1, C_V=c_v,
                          max_upper_violation=upper,
                          max_lower_violation=lower,
                          passed=upper <= 1e-8 and lower <= 1e-8)
