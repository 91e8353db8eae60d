# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: the Metropolis inner loop and the reweighted estimate.

Mirrors ``_kernels_py`` operation for operation.
"""
import numpy as np

from libc.math cimport exp, fabs, log, log1p, INFINITY, NAN

cdef double LOG_2PI = 1.8378770664093453
cdef double NEG_INF = -INFINITY


cdef inline double _unit(double z) noexcept nogil:
    cdef double e
    if z >= 0.0:
        e = exp(-z)
        return 1.0 / (1.0 + e)
    e = exp(z)
    return e / (1.0 + e)


cdef inline double _log_jac(double z) noexcept nogil:
    cdef double a = fabs(z)
    return -a - 2.0 * log1p(exp(-a))


cdef double _log_post(double mu, double tau, double k,
                      const double[::1] y, const double[::1] s2, Py_ssize_t n,
                      double mu0, double tau0, double tau_l,
                      double k_l, double k_u) noexcept nogil:
    cdef Py_ssize_t i
    cdef double kt, bv, acc, v, r, tv
    if not (tau > tau_l and tau < tau0 and k > k_l and k < k_u):
        return NEG_INF
    kt = k * tau
    bv = kt * kt
    acc = 0.0
    for i in range(n):
        v = s2[i] + bv
        r = y[i] - mu
        acc += -0.5 * (LOG_2PI + log(v)) - 0.5 * (r * r) / v
    r = mu - mu0
    tv = tau * tau
    acc += -0.5 * (LOG_2PI + log(tv)) - 0.5 * (r * r) / tv
    acc -= log(tau0 - tau_l)
    acc -= log(k_u - k_l)
    return acc


cdef double _target(double z0, double z1, double z2,
                    const double[::1] y, const double[::1] s2, Py_ssize_t n,
                    double mu0, double tau0, double tau_l, double k_l, double k_u,
                    double* tau_out, double* k_out) noexcept nogil:
    cdef double tw = tau0 - tau_l
    cdef double kw = k_u - k_l
    cdef double tau = tau_l + tw * _unit(z1)
    cdef double k = k_l + kw * _unit(z2)
    cdef double lp = _log_post(z0, tau, k, y, s2, n, mu0, tau0, tau_l, k_l, k_u)
    tau_out[0] = tau
    k_out[0] = k
    if lp == NEG_INF:
        return lp
    lp += log(tw) + _log_jac(z1)
    lp += log(kw) + _log_jac(z2)
    return lp


def log_posterior(double mu, double tau, double k, y, s2, double mu0, double tau0,
                  double tau_l, double k_l, double k_u):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s2, dtype=np.float64)
    return _log_post(mu, tau, k, yv, sv, yv.shape[0], mu0, tau0, tau_l, k_l, k_u)


def log_target_z(z, y, s2, double mu0, double tau0, double tau_l, double k_l, double k_u):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s2, dtype=np.float64)
    cdef double tau, k
    return _target(float(z[0]), float(z[1]), float(z[2]), yv, sv, yv.shape[0],
                   mu0, tau0, tau_l, k_l, k_u, &tau, &k)


def rwm_segment(double[::1] z, double logp, chol, eps, log_u, y, s2,
                double mu0, double tau0, double tau_l, double k_l, double k_u,
                double[:, ::1] out_x, double[:, ::1] out_z):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] sv = np.ascontiguousarray(s2, dtype=np.float64)
    cdef const double[:, ::1] L = np.ascontiguousarray(chol, dtype=np.float64)
    cdef const double[:, ::1] E = np.ascontiguousarray(eps, dtype=np.float64)
    cdef const double[::1] lu = np.ascontiguousarray(log_u, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t m = lu.shape[0]
    cdef Py_ssize_t i
    cdef double l00 = L[0, 0], l10 = L[1, 0], l11 = L[1, 1]
    cdef double l20 = L[2, 0], l21 = L[2, 1], l22 = L[2, 2]
    cdef double z0 = z[0], z1 = z[1], z2 = z[2]
    cdef double p0, p1, p2, e0, e1, e2, lp_new, tau, k, tau_new, k_new
    cdef Py_ssize_t n_acc = 0
    _target(z0, z1, z2, yv, sv, n, mu0, tau0, tau_l, k_l, k_u, &tau, &k)
    with nogil:
        for i in range(m):
            e0 = E[i, 0]
            e1 = E[i, 1]
            e2 = E[i, 2]
            p0 = z0 + l00 * e0
            p1 = z1 + (l10 * e0 + l11 * e1)
            p2 = z2 + ((l20 * e0 + l21 * e1) + l22 * e2)
            lp_new = _target(p0, p1, p2, yv, sv, n, mu0, tau0, tau_l, k_l, k_u,
                             &tau_new, &k_new)
            if lu[i] < lp_new - logp:
                z0 = p0
                z1 = p1
                z2 = p2
                tau = tau_new
                k = k_new
                logp = lp_new
                n_acc += 1
            out_x[i, 0] = z0
            out_x[i, 1] = tau
            out_x[i, 2] = k
            out_z[i, 0] = z0
            out_z[i, 1] = z1
            out_z[i, 2] = z2
    z[0] = z0
    z[1] = z1
    z[2] = z2
    return logp, n_acc


def snis_estimate(mu, tau, f, double mu0_prop, double mu0_tgt, double tau0_tgt):
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] tv = np.ascontiguousarray(tau, dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n = mv.shape[0]
    cdef Py_ssize_t i, n_cov = 0
    cdef double dp, dt, lw, mx = NEG_INF, sw = 0.0, swf = 0.0, w
    cdef double[::1] buf = np.empty(n, dtype=np.float64)
    with nogil:
        for i in range(n):
            if tv[i] < tau0_tgt:
                dp = mv[i] - mu0_prop
                dt = mv[i] - mu0_tgt
                lw = (dp * dp - dt * dt) * 0.5 / (tv[i] * tv[i])
                buf[i] = lw
                n_cov += 1
                if lw > mx:
                    mx = lw
            else:
                buf[i] = NEG_INF
        if n_cov > 0:
            for i in range(n):
                if buf[i] != NEG_INF:
                    w = exp(buf[i] - mx)
                    sw += w
                    swf += w * fv[i]
    if n_cov == 0:
        return NAN, 0
    return swf / sw, n_cov
