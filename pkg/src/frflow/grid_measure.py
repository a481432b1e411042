"""Uniform 1-D grids, quadrature-normalized measures, and divergences.

Probability measures are represented by their density values on the nodes of
a uniform grid, normalized so that the trapezoid quadrature mass is exactly 1.
All divergences are quadratures of the usual integrands; KL and chi^2 follow
the extended-real convention (+inf on support violation).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels as _k
from .errors import (
    GridError,
    GridMismatchError,
    MeasureError,
    RatioUnboundedError,
)

__all__ = [
    "Grid",
    "GridMeasure",
    "ReferenceMeasure",
    "DivergenceReport",
    "build_grid",
    "measure_from_density",
    "measure_from_log_density",
    "gaussian_measure",
    "reference_from_potential",
    "kl",
    "chi2",
    "tv",
    "fisher_rao_distance",
    "f_divergence",
    "density_ratio_bounds",
    "dragomir_check",
    "geometric_mixture",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [x_min, x_max] with trapezoid quadrature weights."""

    x_min: float
    x_max: float
    n: int
    x: np.ndarray = field(repr=False, compare=False)
    weights: np.ndarray = field(repr=False, compare=False)
    h: float = field(compare=False)

    def same_as(self, other: "Grid") -> bool:
        return (
            self.n == other.n
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )


def build_grid(x_min: float, x_max: float, n: int) -> Grid:
    """Build a uniform grid with trapezoid weights (h/2 at ends, h interior)."""
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_min >= x_max:
        raise GridError(f"need finite x_min < x_max, got [{x_min}, {x_max}]")
    if n < 3:
        raise GridError(f"need n >= 3 nodes, got {n}")
    x = np.linspace(x_min, x_max, n)
    h = (x_max - x_min) / (n - 1)
    w = np.full(n, h)
    w[0] = 0.5 * h
    w[-1] = 0.5 * h
    x.flags.writeable = False
    w.flags.writeable = False
    return Grid(x_min=float(x_min), x_max=float(x_max), n=int(n), x=x, weights=w, h=h)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    """Probability density on a grid; quadrature mass is 1 by construction."""

    grid: Grid
    density: np.ndarray = field(repr=False)
    log_density: np.ndarray = field(repr=False)

    def mass(self) -> float:
        return _k.wsum(self.grid.weights, self.density)

    def mean(self) -> float:
        return _k.wsum(self.grid.weights, self.grid.x * self.density)

    def variance(self) -> float:
        mu = self.mean()
        return _k.wsum(self.grid.weights, (self.grid.x - mu) ** 2 * self.density)

    def boundary_mass(self) -> float:
        w = self.grid.weights
        d = self.density
        return float(w[0] * d[0] + w[-1] * d[-1])

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.density > 0.0))


def _finalize_measure(grid: Grid, density: np.ndarray,
                      log_density: np.ndarray) -> GridMeasure:
    density.flags.writeable = False
    log_density.flags.writeable = False
    meas = GridMeasure(grid=grid, density=density, log_density=log_density)
    if abs(meas.mass() - 1.0) > 1e-10:
        raise MeasureError(f"quadrature mass {meas.mass()} not within 1e-10 of 1")
    return meas


def measure_from_density(grid: Grid, values: np.ndarray) -> GridMeasure:
    """Normalize nonnegative node values into a GridMeasure."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n,):
        raise MeasureError(f"expected {grid.n} values, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise MeasureError("density values must be finite")
    if np.any(values < 0.0):
        raise MeasureError("density values must be nonnegative")
    mass = _k.wsum(grid.weights, values)
    if mass <= 0.0:
        raise MeasureError("values have zero quadrature mass")
    density = values / mass
    with np.errstate(divide="ignore"):
        log_density = np.log(density)
    return _finalize_measure(grid, density, log_density)


def measure_from_log_density(grid: Grid, log_values: np.ndarray) -> GridMeasure:
    """Normalize in the log domain; keeps strictly positive densities exact.

    -inf entries are allowed and map to zero density.
    """
    log_values = np.asarray(log_values, dtype=float)
    if log_values.shape != (grid.n,):
        raise MeasureError(f"expected {grid.n} values, got shape {log_values.shape}")
    if np.any(np.isnan(log_values)) or np.any(log_values == np.inf):
        raise MeasureError("log-density values must be < +inf and not NaN")
    lse = _k.logsumexp_w(grid.weights, log_values)
    if lse == -np.inf:
        raise MeasureError("log-density values have zero quadrature mass")
    log_density = log_values - lse
    density = np.exp(log_density)
    return _finalize_measure(grid, density, log_density)


def gaussian_measure(grid: Grid, mean: float, std: float) -> GridMeasure:
    """Normalized Gaussian density on the grid (test fixture)."""
    if std <= 0.0:
        raise MeasureError(f"std must be positive, got {std}")
    if mean - 6.0 * std < grid.x_min or mean + 6.0 * std > grid.x_max:
        warnings.warn(
            f"gaussian_measure: [mean - 6 std, mean + 6 std] exceeds the grid "
            f"domain [{grid.x_min}, {grid.x_max}]; mass is truncated",
            stacklevel=2,
        )
    logv = -0.5 * ((grid.x - mean) / std) ** 2
    return measure_from_log_density(grid, logv)


@dataclass(frozen=True, eq=False)
class ReferenceMeasure:
    """Reference measure pi propto e^{-U} with its potential and log Z."""

    potential_U: np.ndarray = field(repr=False)
    measure: GridMeasure = field(repr=False)
    log_Z: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.measure.grid


def reference_from_potential(grid: Grid, potential_values: np.ndarray) -> ReferenceMeasure:
    potential_values = np.asarray(potential_values, dtype=float)
    if potential_values.shape != (grid.n,):
        raise MeasureError(
            f"expected {grid.n} potential values, got shape {potential_values.shape}"
        )
    if not np.all(np.isfinite(potential_values)):
        raise MeasureError("potential values must be finite")
    log_Z = _k.logsumexp_w(grid.weights, -potential_values)
    meas = measure_from_log_density(grid, -potential_values)
    potential_values = potential_values.copy()
    potential_values.flags.writeable = False
    return ReferenceMeasure(potential_U=potential_values, measure=meas, log_Z=log_Z)


def _check_same_grid(m: GridMeasure, m_prime: GridMeasure) -> None:
    if not m.grid.same_as(m_prime.grid):
        raise GridMismatchError("measures live on different grids")


def kl(m: GridMeasure, m_prime: GridMeasure) -> float:
    """KL(m|m') by quadrature; +inf if m > 0 somewhere m' = 0."""
    _check_same_grid(m, m_prime)
    return _k.kl_sum(m.grid.weights, m.density, m_prime.density)


def chi2(m: GridMeasure, m_prime: GridMeasure) -> float:
    """chi^2(m|m') = int (m/m' - 1)^2 m' by quadrature."""
    _check_same_grid(m, m_prime)
    return _k.chi2_sum(m.grid.weights, m.density, m_prime.density)


def tv(m: GridMeasure, m_prime: GridMeasure) -> float:
    """Total variation distance (1/2) int |m - m'|."""
    _check_same_grid(m, m_prime)
    return _k.tv_sum(m.grid.weights, m.density, m_prime.density)


def fisher_rao_distance(m: GridMeasure, m_prime: GridMeasure) -> float:
    """int (sqrt m - sqrt m')^2 = 2 - 2 int sqrt(m m')."""
    _check_same_grid(m, m_prime)
    return _k.hellinger_sum(m.grid.weights, m.density, m_prime.density)


def f_divergence(m: GridMeasure, m_prime: GridMeasure, f) -> float:
    """I_f(m|m') = int f(m/m') m' for convex f with f(1) = 0.

    Convexity and f(1) = 0 are asserted by the caller.  Nodes with m' = 0 and
    m > 0 make the divergence +inf; both-zero nodes contribute 0.
    """
    _check_same_grid(m, m_prime)
    w = m.grid.weights
    md = m.density
    mpd = m_prime.density
    sup = mpd > 0.0
    if np.any(md[~sup] > 0.0):
        return np.inf
    vals = f(md[sup] / mpd[sup])
    if not np.all(np.isfinite(vals)):
        return np.inf
    return float(np.dot(w[sup], vals * mpd[sup]))


def density_ratio_bounds(m: GridMeasure, m_prime: GridMeasure) -> tuple[float, float]:
    """(r, R) = extrema of m/m' over nodes with m' > 0; both-zero nodes skipped."""
    _check_same_grid(m, m_prime)
    lo, hi, ok = _k.ratio_minmax(m.density, m_prime.density)
    if not ok:
        raise RatioUnboundedError("m > 0 at a node where m' = 0")
    return float(lo), float(hi)


@dataclass(frozen=True)
class DivergenceReport:
    """Two-sided divergence summary of a measure pair."""

    kl_fwd: float
    kl_rev: float
    chi2_fwd: float
    chi2_rev: float
    tv: float
    fisher_rao: float
    ratio_min: float
    ratio_max: float


def divergence_report(m: GridMeasure, m_prime: GridMeasure) -> DivergenceReport:
    r, big_r = density_ratio_bounds(m, m_prime)
    return DivergenceReport(
        kl_fwd=kl(m, m_prime),
        kl_rev=kl(m_prime, m),
        chi2_fwd=chi2(m, m_prime),
        chi2_rev=chi2(m_prime, m),
        tv=tv(m, m_prime),
        fisher_rao=fisher_rao_distance(m, m_prime),
        ratio_min=r,
        ratio_max=big_r,
    )


@dataclass(frozen=True)
class DragomirReport:
    """Two-sided f-divergence comparison flags for a measure pair.

    The two headline inequalities are KL(m'|m) <= (1/r) KL(m|m') and
    chi^2(m|m') <= 2R KL(m|m'); the sandwich entries bound I_f by multiples
    of KL for f = -log t (a = 1/R, A = 1/r) and f = (t-1)^2 (a = 2r, A = 2R).
    """

    report: DivergenceReport
    kl_reversal_holds: bool
    chi2_bound_holds: bool
    sandwich_neg_log_holds: bool
    sandwich_quadratic_holds: bool
    slack: float

    def all_hold(self) -> bool:
        return (
            self.kl_reversal_holds
            and self.chi2_bound_holds
            and self.sandwich_neg_log_holds
            and self.sandwich_quadratic_holds
        )


def dragomir_check(m: GridMeasure, m_prime: GridMeasure,
                   tol: float = 1e-10) -> DragomirReport:
    """Check the ratio-based divergence comparison inequalities for a pair."""
    rep = divergence_report(m, m_prime)
    r, big_r = rep.ratio_min, rep.ratio_max
    slacks = [
        (1.0 / r) * rep.kl_fwd - rep.kl_rev,
        2.0 * big_r * rep.kl_fwd - rep.chi2_fwd,
        # sandwich for f = -log t: I_f(m|m') = KL(m'|m)
        rep.kl_rev - (1.0 / big_r) * rep.kl_fwd,
        (1.0 / r) * rep.kl_fwd - rep.kl_rev,
        # sandwich for f = (t-1)^2: I_f(m|m') = chi^2(m|m')
        rep.chi2_fwd - 2.0 * r * rep.kl_fwd,
        2.0 * big_r * rep.kl_fwd - rep.chi2_fwd,
    ]
    return DragomirReport(
        report=rep,
        kl_reversal_holds=slacks[0] >= -tol,
        chi2_bound_holds=slacks[1] >= -tol,
        sandwich_neg_log_holds=min(slacks[2], slacks[3]) >= -tol,
        sandwich_quadratic_holds=min(slacks[4], slacks[5]) >= -tol,
        slack=float(min(slacks)),
    )


def geometric_mixture(m0: GridMeasure, pi: GridMeasure, lam: float) -> GridMeasure:
    """Normalized geometric mixture m propto pi^(1-lam) * m0^lam, lam in [0,1].

    Endpoints return the inputs unchanged so that lam = 0, 1 are exact.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    _check_same_grid(m0, pi)
    if lam == 0.0:
        return pi
    if lam == 1.0:
        return m0
    logv = lam * m0.log_density + (1.0 - lam) * pi.log_density
    return measure_from_log_density(m0.grid, logv)
