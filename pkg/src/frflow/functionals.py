"""Energy functionals F with closed-form flat derivatives, and V^sigma.

Four variants: Zero, LinearPotential (int f dm), QuadraticInteraction
(1/2 iint K dm dm), MeanFieldLearner (mean-squared prediction loss with
fixed ridge features).  Flat derivatives follow the zero-m-mean convention:
the returned node function always satisfies int (dF/dm) dm = 0.

All four are convex in m, so the derivative bounds C (sup |dF/dm|) and C2
(sup |d2F/dm2|) certified at construction are over grid measures only; this
is a stated limitation of the truncated window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels as _k
from .errors import GridMismatchError, MeasureError, ZeroDensityError
from .grid_measure import (
    Grid,
    GridMeasure,
    ReferenceMeasure,
    kl,
    measure_from_density,
)

__all__ = [
    "EnergyFunctional",
    "ZeroEnergy",
    "LinearPotential",
    "QuadraticInteraction",
    "MeanFieldLearner",
    "RegularizedEnergy",
    "eval_F",
    "flat_derivative",
    "flat_derivative_defcheck",
    "convexity_check",
    "eval_V",
    "drift_a",
]


class EnergyFunctional:
    """Base class: value_and_flat() is the single primitive.

    Subclasses return the energy value together with the *recentred* flat
    derivative (quadrature m-mean 0) computed from shared intermediates.
    bound_C / bound_C2 are certified sups of |dF/dm| and |d2F/dm2| over grid
    measures; every derivative evaluation is checked against bound_C
    (tracked assertion) and the running observed max is kept for reporting.
    """

    variant: str = "base"

    def __init__(self, grid: Grid, bound_C: float, bound_C2: float):
        self.grid = grid
        self.bound_C = float(bound_C)
        self.bound_C2 = float(bound_C2)
        self.observed_derivative_max = 0.0

    def _check_grid(self, m: GridMeasure) -> None:
        if not m.grid.same_as(self.grid):
            raise GridMismatchError("measure grid differs from functional grid")

    def _raw_value_and_potential(self, m: GridMeasure):
        """Return (F(m), un-recentred dF/dm(m, .) on nodes)."""
        raise NotImplementedError

    def value_and_flat(self, m: GridMeasure) -> tuple[float, np.ndarray]:
        self._check_grid(m)
        value, pot = self._raw_value_and_potential(m)
        shift = _k.wsum(self.grid.weights, pot * m.density)
        out = pot - shift
        peak = float(np.max(np.abs(out))) if out.size else 0.0
        if peak > self.bound_C + 1e-10:
            raise AssertionError(
                f"flat derivative magnitude {peak} exceeds certified bound_C="
                f"{self.bound_C}"
            )
        if peak > self.observed_derivative_max:
            self.observed_derivative_max = peak
        return float(value), out


class ZeroEnergy(EnergyFunctional):
    variant = "zero"

    def __init__(self, grid: Grid):
        super().__init__(grid, bound_C=0.0, bound_C2=0.0)

    def _raw_value_and_potential(self, m: GridMeasure):
        return 0.0, np.zeros(self.grid.n)


class LinearPotential(EnergyFunctional):
    """F(m) = int f dm; flat derivative f - int f dm, second derivative 0."""

    variant = "linear"

    def __init__(self, grid: Grid, f_values: np.ndarray):
        f_values = np.asarray(f_values, dtype=float)
        if f_values.shape != (grid.n,):
            raise MeasureError(f"expected {grid.n} values of f")
        if not np.all(np.isfinite(f_values)):
            raise MeasureError("potential f must be finite on the grid")
        # after recentring, |f - int f dm| <= max f - min f
        c = float(np.max(f_values) - np.min(f_values))
        super().__init__(grid, bound_C=c, bound_C2=0.0)
        f_values = f_values.copy()
        f_values.flags.writeable = False
        self.f_values = f_values

    def _raw_value_and_potential(self, m: GridMeasure):
        value = _k.wsum(self.grid.weights, self.f_values * m.density)
        return value, self.f_values


class QuadraticInteraction(EnergyFunctional):
    """F(m) = 1/2 iint K dm dm with symmetric kernel K on the node grid."""

    variant = "interaction"

    def __init__(self, grid: Grid, kernel: np.ndarray):
        kernel = np.asarray(kernel, dtype=float)
        if kernel.shape != (grid.n, grid.n):
            raise MeasureError(f"kernel must be {grid.n} x {grid.n}")
        if not np.all(np.isfinite(kernel)):
            raise MeasureError("kernel must be finite")
        if np.max(np.abs(kernel - kernel.T)) > 1e-12:
            raise MeasureError("kernel must be symmetric to 1e-12")
        k_max = float(np.max(np.abs(kernel)))
        # |(Km)(x)| <= max|K| and |iint K dm dm| <= max|K|
        super().__init__(grid, bound_C=2.0 * k_max, bound_C2=k_max)
        kernel = kernel.copy()
        kernel.flags.writeable = False
        self.kernel = kernel

    def _raw_value_and_potential(self, m: GridMeasure):
        km = self.kernel @ (self.grid.weights * m.density)
        value = 0.5 * _k.wsum(self.grid.weights, km * m.density)
        return value, km


class MeanFieldLearner(EnergyFunctional):
    """F(m) = mean_k (1/2)(<phi_k, m> - y_k)^2 with fixed bounded features.

    Convex in m (quadratic with PSD second derivative
    mean_k phi_k(x) phi_k(y)).
    """

    variant = "learner"

    def __init__(self, grid: Grid, features: np.ndarray, targets: np.ndarray):
        features = np.asarray(features, dtype=float)
        targets = np.asarray(targets, dtype=float)
        if features.ndim != 2 or features.shape[1] != grid.n:
            raise MeasureError(f"features must be n_data x {grid.n}")
        if targets.shape != (features.shape[0],):
            raise MeasureError("targets must match the number of feature rows")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(targets))):
            raise MeasureError("features and targets must be finite")
        phi_max = float(np.max(np.abs(features)))
        y_max = float(np.max(np.abs(targets))) if targets.size else 0.0
        # residual |<phi_k,m> - y_k| <= phi_max + y_max; recentred feature
        # spread <= 2 phi_max
        c = (phi_max + y_max) * 2.0 * phi_max
        c2 = phi_max * phi_max
        super().__init__(grid, bound_C=c, bound_C2=c2)
        features = features.copy()
        targets = targets.copy()
        features.flags.writeable = False
        targets.flags.writeable = False
        self.features = features
        self.targets = targets

    def _raw_value_and_potential(self, m: GridMeasure):
        preds = self.features @ (self.grid.weights * m.density)
        resid = preds - self.targets
        value = 0.5 * float(np.mean(resid * resid))
        pot = (resid @ self.features) / self.features.shape[0]
        return value, pot


def eval_F(F: EnergyFunctional, m: GridMeasure) -> float:
    return F.value_and_flat(m)[0]


def flat_derivative(F: EnergyFunctional, m: GridMeasure) -> np.ndarray:
    return F.value_and_flat(m)[1]


def flat_derivative_defcheck(F: EnergyFunctional, m: GridMeasure,
                             m_prime: GridMeasure, n_lambda: int) -> float:
    """Residual of F(m') - F(m) = int_0^1 int dF/dm(m_lam)(m'-m) dx dlam.

    The lambda integral uses composite trapezoid with n_lambda panels; the
    residual scales as O(n_lambda^-2) (and vanishes for F at most quadratic).
    """
    F._check_grid(m)
    F._check_grid(m_prime)
    if n_lambda < 8:
        raise ValueError(f"n_lambda must be >= 8, got {n_lambda}")
    w = F.grid.weights
    diff = m_prime.density - m.density
    lams = np.linspace(0.0, 1.0, n_lambda + 1)
    inner = np.empty(lams.size)
    for i, lam in enumerate(lams):
        mix_density = (1.0 - lam) * m.density + lam * m_prime.density
        mix = measure_from_density(F.grid, mix_density)
        _, dfm = F.value_and_flat(mix)
        inner[i] = float(np.dot(w, dfm * diff))
    h_lam = 1.0 / n_lambda
    lam_quad = h_lam * (np.sum(inner) - 0.5 * (inner[0] + inner[-1]))
    lhs = eval_F(F, m_prime) - eval_F(F, m)
    return abs(lhs - lam_quad)


def convexity_check(F: EnergyFunctional, m: GridMeasure,
                    m_prime: GridMeasure) -> float:
    """Slack of F(m) - F(m') <= int dF/dm(m)(m - m'); >= 0 for convex F."""
    value_m, dfm = F.value_and_flat(m)
    value_mp = eval_F(F, m_prime)
    lin = float(np.dot(F.grid.weights, dfm * (m.density - m_prime.density)))
    return lin - (value_m - value_mp)


@dataclass(frozen=True, eq=False)
class RegularizedEnergy:
    """V^sigma(m) = F(m) + (sigma^2/2) KL(m|pi)."""

    F: EnergyFunctional
    pi: ReferenceMeasure
    sigma: float = 1.0
    grid: Grid = field(init=False)

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise MeasureError(f"sigma must be positive, got {self.sigma}")
        if not self.F.grid.same_as(self.pi.grid):
            raise GridMismatchError("functional and reference grids differ")
        object.__setattr__(self, "grid", self.F.grid)


def eval_V(V: RegularizedEnergy, m: GridMeasure) -> float:
    """V^sigma(m); +inf when m is not absolutely continuous w.r.t. pi."""
    value_f = eval_F(V.F, m)
    return value_f + 0.5 * V.sigma**2 * kl(m, V.pi.measure)


def drift_a(V: RegularizedEnergy, m: GridMeasure) -> np.ndarray:
    """Birth-death drift a = dF/dm + (s^2/2) log(m/pi) - (s^2/2) KL(m|pi).

    Quadrature m-mean of the output is 0 by construction.
    """
    return _drift_with_value(V, m)[1]


def _drift_with_value(V: RegularizedEnergy, m: GridMeasure):
    """(V^sigma(m), a(m, .), dF/dm(m, .)) with shared intermediates."""
    if not m.is_strictly_positive():
        raise ZeroDensityError("drift needs a strictly positive density")
    value_f, dfm = V.F.value_and_flat(m)
    half_s2 = 0.5 * V.sigma**2
    log_ratio = m.log_density - V.pi.measure.log_density
    kl_val = _k.wsum(m.grid.weights, m.density * log_ratio)
    a = dfm + half_s2 * (log_ratio - kl_val)
    return value_f + half_s2 * kl_val, a, dfm
