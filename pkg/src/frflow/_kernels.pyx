# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot per-step kernels.

Semantics match frflow._kernels_py exactly; see that module for docs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, log, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"


def wsum(const double[::1] w, const double[::1] v):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += w[i] * v[i]
    return s


def logsumexp_w(const double[::1] w, const double[::1] logv):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double mx = -INFINITY
    cdef double s = 0.0
    for i in range(n):
        if logv[i] > mx:
            mx = logv[i]
    if mx == -INFINITY:
        return -INFINITY
    for i in range(n):
        s += w[i] * exp(logv[i] - mx)
    return mx + log(s)


def kl_sum(const double[::1] w, const double[::1] m, const double[::1] mp):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0
    for i in range(n):
        if m[i] > 0.0:
            if mp[i] == 0.0:
                return INFINITY
            s += w[i] * m[i] * log(m[i] / mp[i])
    return s


def chi2_sum(const double[::1] w, const double[::1] m, const double[::1] mp):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0, t
    for i in range(n):
        if mp[i] > 0.0:
            t = m[i] / mp[i] - 1.0
            s += w[i] * t * t * mp[i]
        elif m[i] > 0.0:
            return INFINITY
    return s


def tv_sum(const double[::1] w, const double[::1] m, const double[::1] mp):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += w[i] * fabs(m[i] - mp[i])
    return 0.5 * s


def hellinger_sum(const double[::1] w, const double[::1] m, const double[::1] mp):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0, d
    for i in range(n):
        d = sqrt(m[i]) - sqrt(mp[i])
        s += w[i] * d * d
    return s


def ratio_minmax(const double[::1] m, const double[::1] mp):
    cdef Py_ssize_t i, n = m.shape[0]
    cdef double lo = INFINITY, hi = -INFINITY, ratio
    cdef bint seen = False
    for i in range(n):
        if mp[i] == 0.0:
            if m[i] > 0.0:
                return np.nan, np.nan, 0.0
            continue
        ratio = m[i] / mp[i]
        if ratio < lo:
            lo = ratio
        if ratio > hi:
            hi = ratio
        seen = True
    if not seen:
        return np.nan, np.nan, 0.0
    return lo, hi, 1.0


def a_norm_sq(const double[::1] w, const double[::1] a, const double[::1] m):
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += w[i] * a[i] * a[i] * m[i]
    return s


def exp_step(const double[::1] log_m, const double[::1] target_log, double lam,
             const double[::1] w):
    cdef Py_ssize_t i, n = log_m.shape[0]
    cdef cnp.ndarray[double, ndim=1] log_new = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] m_new = np.empty(n)
    cdef double[::1] raw = log_new
    cdef double mx = -INFINITY
    cdef double s = 0.0, lse
    for i in range(n):
        raw[i] = lam * log_m[i] + (1.0 - lam) * target_log[i]
        if raw[i] > mx:
            mx = raw[i]
    for i in range(n):
        s += w[i] * exp(raw[i] - mx)
    lse = mx + log(s)
    for i in range(n):
        raw[i] -= lse
        m_new[i] = exp(raw[i])
    return log_new, m_new


def euler_step(const double[::1] m, const double[::1] a, double dt, const double[::1] w):
    cdef Py_ssize_t i, n = m.shape[0]
    cdef cnp.ndarray[double, ndim=1] m_new = np.empty(n)
    cdef double[::1] out = m_new
    cdef double factor, min_factor = INFINITY, mass = 0.0
    for i in range(n):
        factor = 1.0 - dt * a[i]
        if factor < min_factor:
            min_factor = factor
        out[i] = m[i] * factor
        mass += w[i] * out[i]
    for i in range(n):
        out[i] /= mass
    return m_new, min_factor


def fv_step_upwind(const double[::1] m, const double[::1] a, double h,
                   const double[::1] w,
                   double dt):
    cdef Py_ssize_t i, n = m.shape[0]
    cdef cnp.ndarray[double, ndim=1] m_new = np.empty(n)
    cdef double[::1] out = m_new
    cdef double flux_left = 0.0, flux_right, v
    cdef double mn = INFINITY, mass = 0.0
    for i in range(n):
        if i < n - 1:
            v = -(a[i + 1] - a[i]) / h
            flux_right = v * (m[i] if v > 0.0 else m[i + 1])
        else:
            flux_right = 0.0
        out[i] = m[i] + dt * (flux_left - flux_right) / w[i]
        if out[i] < mn:
            mn = out[i]
        mass += w[i] * out[i]
        flux_left = flux_right
    for i in range(n):
        out[i] /= mass
    return m_new, mn


def fv_step_fixed_mobility(const double[::1] m, const double[::1] abar,
                           const double[::1] mob_iface, double h,
                           const double[::1] w,
                           double dt):
    cdef Py_ssize_t i, n = m.shape[0]
    cdef cnp.ndarray[double, ndim=1] m_new = np.empty(n)
    cdef double[::1] out = m_new
    cdef double flux_left = 0.0, flux_right
    cdef double mn = INFINITY, mass = 0.0
    for i in range(n):
        if i < n - 1:
            flux_right = -(abar[i + 1] - abar[i]) / h * mob_iface[i]
        else:
            flux_right = 0.0
        out[i] = m[i] + dt * (flux_left - flux_right) / w[i]
        if out[i] < mn:
            mn = out[i]
        mass += w[i] * out[i]
        flux_left = flux_right
    for i in range(n):
        out[i] /= mass
    return m_new, mn


def gradient_centered(const double[::1] v, double h):
    cdef Py_ssize_t i, n = v.shape[0]
    cdef cnp.ndarray[double, ndim=1] g = np.empty(n)
    cdef double[::1] out = g
    out[0] = (v[1] - v[0]) / h
    for i in range(1, n - 1):
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * h)
    out[n - 1] = (v[n - 1] - v[n - 2]) / h
    return g
