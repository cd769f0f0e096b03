# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; same signatures and semantics as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, sqrt, fabs, INFINITY

cnp.import_array()

cdef double INV_SQRT_2PI = 0.3989422804014327
cdef double SQRT1_2 = 0.7071067811865476
MAX_EXPAND = 200
cdef int C_MAX_EXPAND = 200


class KernelError(RuntimeError):
    pass


cdef inline double _pdf(double x) nogil:
    return INV_SQRT_2PI * exp(-0.5 * x * x)


cdef inline double _cdf(double x) nogil:
    return 0.5 * erfc(-x * SQRT1_2)


cdef double _tail_sum(const double[:] values, const double[:] probs, double u,
                      double alpha) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, b
    for i in range(values.shape[0]):
        b = values[i] * u
        s += probs[i] * (_cdf(b - alpha) + _cdf(-b - alpha))
    return s


cdef inline double _atom_mse(double b, double alpha) nogil:
    cdef double lo1 = alpha - b
    cdef double lo2 = alpha + b
    cdef double a2 = alpha * alpha + 1.0
    cdef double m1 = (lo1 - 2.0 * alpha) * _pdf(lo1) + a2 * _cdf(-lo1)
    cdef double m2 = (lo2 - 2.0 * alpha) * _pdf(lo2) + a2 * _cdf(-lo2)
    cdef double inside = _cdf(alpha - b) - _cdf(-alpha - b)
    return m1 + m2 + b * b * inside


cdef double _mse_sum(const double[:] values, const double[:] probs, double u,
                     double alpha) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(values.shape[0]):
        s += probs[i] * _atom_mse(values[i] * u, alpha)
    return s


cdef int _solve_alpha(const double[:] values, const double[:] probs, double u,
                      double delta, double tol, double* alpha_out) nogil:
    # returns iteration count, or -1 when the bracket cannot be expanded
    cdef double lo = 0.0, hi = 1.0, mid, rlo, rhi
    cdef int n_expand = 0, it = 0
    while _tail_sum(values, probs, u, hi) - delta > 0.0:
        lo = hi
        hi *= 2.0
        n_expand += 1
        if n_expand > C_MAX_EXPAND:
            return -1
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= tol:
            break
        if _tail_sum(values, probs, u, mid) - delta > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    rlo = fabs(_tail_sum(values, probs, u, lo) - delta)
    rhi = fabs(_tail_sum(values, probs, u, hi) - delta)
    alpha_out[0] = lo if rlo <= rhi else hi
    return it + n_expand


cdef int _interp_residual(const double[:] values, const double[:] probs, double u,
                          double delta, double sigma, double* r_out,
                          double* alpha_out) nogil:
    cdef double alpha
    if _solve_alpha(values, probs, u, delta, 0.0, &alpha) < 0:
        return -1
    r_out[0] = sigma * sigma * u * u - 1.0 + _mse_sum(values, probs, u, alpha) / delta
    alpha_out[0] = alpha
    return 0


def tail_sum(values, probs, double u, double alpha):
    return _tail_sum(np.asarray(values, dtype=float), np.asarray(probs, dtype=float), u, alpha)


def atom_mse(double b, double alpha):
    return _atom_mse(b, alpha)


def mse_sum(values, probs, double u, double alpha):
    return _mse_sum(np.asarray(values, dtype=float), np.asarray(probs, dtype=float), u, alpha)


def solve_alpha(values, probs, double u, double delta, double tol=0.0):
    cdef double alpha = 0.0
    cdef int it = _solve_alpha(np.asarray(values, dtype=float),
                               np.asarray(probs, dtype=float), u, delta, tol, &alpha)
    if it < 0:
        raise KernelError("alpha bracket expansion failed")
    return alpha, it


def interp_residual(values, probs, double u, double delta, double sigma):
    cdef double r = 0.0, alpha = 0.0
    if _interp_residual(np.asarray(values, dtype=float), np.asarray(probs, dtype=float),
                        u, delta, sigma, &r, &alpha) < 0:
        raise KernelError("alpha bracket expansion failed")
    return r, alpha


def solve_interp(values, probs, double delta, double sigma, double u_lo, double u_hi,
                 double tol):
    cdef const double[:] v = np.asarray(values, dtype=float)
    cdef const double[:] p = np.asarray(probs, dtype=float)
    cdef double r_lo = 0.0, r_hi = 0.0, r = 0.0, a = 0.0, a_lo = 0.0, a_hi = 0.0
    cdef double lo = u_lo, hi = u_hi, mid
    cdef int it = 0, status = 0
    with nogil:
        status = _interp_residual(v, p, u_lo, delta, sigma, &r_lo, &a)
        if status == 0:
            status = _interp_residual(v, p, u_hi, delta, sigma, &r_hi, &a)
    if status < 0:
        raise KernelError("alpha bracket expansion failed")
    if r_lo > 0.0 or r_hi < 0.0:
        raise KernelError(
            f"no sign change on [{u_lo!r}, {u_hi!r}]: residuals {r_lo!r}, {r_hi!r}")
    with nogil:
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi or hi - lo <= tol:
                break
            status = _interp_residual(v, p, mid, delta, sigma, &r, &a)
            if status < 0:
                break
            if r < 0.0:
                lo = mid
            else:
                hi = mid
            it += 1
        if status == 0:
            status = _interp_residual(v, p, lo, delta, sigma, &r_lo, &a_lo)
        if status == 0:
            status = _interp_residual(v, p, hi, delta, sigma, &r_hi, &a_hi)
    if status < 0:
        raise KernelError("alpha bracket expansion failed")
    if fabs(r_lo) <= fabs(r_hi):
        return lo, a_lo, it
    return hi, a_hi, it


cdef double _se_map(const double[:] values, const double[:] probs, double tau_sq,
                    double zeta, double delta, double sigma) nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0, m, tau
    if tau_sq <= 0.0:
        for i in range(values.shape[0]):
            m = fabs(values[i])
            if zeta < m:
                m = zeta
            s += probs[i] * m * m
        return sigma * sigma + s / delta
    tau = sqrt(tau_sq)
    return sigma * sigma + tau_sq * _mse_sum(values, probs, 1.0 / tau, zeta / tau) / delta


def se_map(values, probs, double tau_sq, double zeta, double delta, double sigma):
    return _se_map(np.asarray(values, dtype=float), np.asarray(probs, dtype=float),
                   tau_sq, zeta, delta, sigma)


def solve_tau_of_alpha(values, probs, double alpha, double delta, double sigma,
                       double tol=0.0):
    cdef const double[:] v = np.asarray(values, dtype=float)
    cdef const double[:] p = np.asarray(probs, dtype=float)
    cdef double lo = sigma * sigma
    cdef double hi = 2.0 * lo if lo > 0.0 else 1.0
    cdef double mid
    cdef int n_expand = 0, it = 0
    with nogil:
        while _se_map(v, p, hi, alpha * sqrt(hi), delta, sigma) - hi > 0.0:
            lo = hi
            hi *= 2.0
            n_expand += 1
            if n_expand > C_MAX_EXPAND:
                break
    if n_expand > C_MAX_EXPAND:
        raise KernelError("tau bracket expansion failed")
    with nogil:
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi or hi - lo <= tol * mid:
                break
            if _se_map(v, p, mid, alpha * sqrt(mid), delta, sigma) - mid > 0.0:
                lo = mid
            else:
                hi = mid
            it += 1
    return 0.5 * (lo + hi), it + n_expand


def lasso_cd(X, y, double lam, cnp.ndarray[cnp.float64_t, ndim=1] theta, double tol,
             int max_sweeps):
    cdef double[::1, :] Xf = np.asfortranarray(X, dtype=float)
    cdef Py_ssize_t n = Xf.shape[0], p = Xf.shape[1], i, j
    cdef double[::1] r = np.ascontiguousarray(y - X @ theta, dtype=float)
    cdef double[::1] th = theta
    cdef double[::1] col_sq = np.empty(p)
    cdef double rho, new, old, cj, d, s
    cdef int sweeps = 0
    cdef double kkt = INFINITY
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += Xf[i, j] * Xf[i, j]
        col_sq[j] = s
    while sweeps < max_sweeps:
        sweeps += 1
        with nogil:
            for j in range(p):
                cj = col_sq[j]
                if cj == 0.0:
                    continue
                old = th[j]
                rho = 0.0
                for i in range(n):
                    rho += Xf[i, j] * r[i]
                rho += cj * old
                if rho > lam:
                    new = (rho - lam) / cj
                elif rho < -lam:
                    new = (rho + lam) / cj
                else:
                    new = 0.0
                if new != old:
                    d = new - old
                    for i in range(n):
                        r[i] -= d * Xf[i, j]
                    th[j] = new
            kkt = _kkt(Xf, r, th, lam)
        if kkt <= tol:
            break
    return sweeps, kkt


cdef double _kkt(double[::1, :] Xf, double[::1] r, double[::1] th, double lam) nogil:
    cdef Py_ssize_t n = Xf.shape[0], p = Xf.shape[1], i, j
    cdef double g, v, m = 0.0
    for j in range(p):
        g = 0.0
        for i in range(n):
            g += Xf[i, j] * r[i]
        if th[j] > 0.0:
            v = fabs(g - lam)
        elif th[j] < 0.0:
            v = fabs(g + lam)
        else:
            v = fabs(g) - lam
        if v > m:
            m = v
    return m


def kkt_violation(X, r, theta, double lam):
    return _kkt(np.asfortranarray(X, dtype=float), np.ascontiguousarray(r, dtype=float),
                np.ascontiguousarray(theta, dtype=float), lam)
