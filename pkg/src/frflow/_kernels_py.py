"""Pure-NumPy implementations of the hot per-step kernels.

Mirror of the compiled extension ``frflow._kernels``; both expose the same
functions with identical semantics so the backend can be swapped at import
time (see ``frflow._backend``).  All arrays are 1-D float64 and contiguous.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def wsum(w, v):
    return float(np.dot(w, v))


def logsumexp_w(w, logv):
    # max-shifted so that exp never overflows; -inf entries contribute 0
    s = float(np.max(logv))
    if s == -np.inf:
        return -np.inf
    return s + float(np.log(np.dot(w, np.exp(logv - s))))


def kl_sum(w, m, mp):
    pos = m > 0.0
    if np.any(mp[pos] == 0.0):
        return np.inf
    return float(np.dot(w[pos], m[pos] * np.log(m[pos] / mp[pos])))


def chi2_sum(w, m, mp):
    pos = m > 0.0
    if np.any(mp[pos] == 0.0):
        return np.inf
    sup = mp > 0.0
    t = np.zeros_like(m)
    t[sup] = m[sup] / mp[sup] - 1.0
    return float(np.dot(w[sup], t[sup] * t[sup] * mp[sup]))


def tv_sum(w, m, mp):
    return 0.5 * float(np.dot(w, np.abs(m - mp)))


def hellinger_sum(w, m, mp):
    d = np.sqrt(m) - np.sqrt(mp)
    return float(np.dot(w, d * d))


def ratio_minmax(m, mp):
    """(min, max) of m/mp over nodes where mp > 0, skipping both-zero nodes.

    Third element of the return is 0.0 if some node has m > 0 and mp == 0
    (ratio unbounded), else 1.0.
    """
    both_zero = (m == 0.0) & (mp == 0.0)
    bad = (m > 0.0) & (mp == 0.0)
    if np.any(bad):
        return np.nan, np.nan, 0.0
    keep = ~both_zero
    ratio = m[keep] / mp[keep]
    return float(np.min(ratio)), float(np.max(ratio)), 1.0


def a_norm_sq(w, a, m):
    return float(np.dot(w, a * a * m))


def exp_step(log_m, target_log, lam, w):
    """One exponential (frozen-drift) step in the log domain.

    raw = lam*log_m + (1-lam)*target_log, renormalized by quadrature
    logsumexp.  Returns (log_new, m_new).
    """
    raw = lam * log_m + (1.0 - lam) * target_log
    lse = logsumexp_w(w, raw)
    log_new = raw - lse
    return log_new, np.exp(log_new)


def euler_step(m, a, dt, w):
    """Explicit Euler birth-death step m <- m*(1 - dt*a), renormalized.

    Returns (m_new, min_factor); the caller must reject the step when
    min_factor <= 0 (positivity guard).
    """
    factor = 1.0 - dt * a
    min_factor = float(np.min(factor))
    m_tmp = m * factor
    mass = float(np.dot(w, m_tmp))
    return m_tmp / mass, min_factor


def fv_step_upwind(m, a, h, w, dt):
    """Finite-volume transport step for d/dt m = div(grad(a) m).

    Conservation form with flux F_{i+1/2} = -(grad a)_{i+1/2} * m_upwind and
    zero flux through the boundary; trapezoid weights act as cell volumes so
    total mass is conserved exactly.  Returns (m_new, min_before_renorm).
    """
    v = -(a[1:] - a[:-1]) / h
    up = np.where(v > 0.0, m[:-1], m[1:])
    flux = v * up
    div = np.zeros_like(m)
    div[1:] += flux
    div[:-1] -= flux
    m_new = m + dt * div / w
    mn = float(np.min(m_new))
    mass = float(np.dot(w, m_new))
    return m_new / mass, mn


def fv_step_fixed_mobility(m, abar, mob_iface, h, w, dt):
    """Like fv_step_upwind but with a fixed interface mobility (no upwinding).

    Flux F_{i+1/2} = -(grad abar)_{i+1/2} * mob_iface_i.
    """
    flux = -(abar[1:] - abar[:-1]) / h * mob_iface
    div = np.zeros_like(m)
    div[1:] += flux
    div[:-1] -= flux
    m_new = m + dt * div / w
    mn = float(np.min(m_new))
    mass = float(np.dot(w, m_new))
    return m_new / mass, mn


def gradient_centered(v, h):
    """Centered differences on interior nodes, one-sided at the ends."""
    g = np.empty_like(v)
    g[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    g[0] = (v[1] - v[0]) / h
    g[-1] = (v[-1] - v[-2]) / h
    return g
