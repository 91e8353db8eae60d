"""Pure-Python versions of the hot kernels.

Arithmetic is written in the same order as ``_kernels.pyx`` so the random
walk produces identical draws under either backend.
"""
import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
NEG_INF = -math.inf

__all__ = ["log_posterior", "log_target_z", "rwm_segment", "snis_estimate"]


def _unit(z):
    if z >= 0.0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


def _log_jac(z):
    a = math.fabs(z)
    return -a - 2.0 * math.log1p(math.exp(-a))


def _log_post(mu, tau, k, y, s2, n, mu0, tau0, tau_l, k_l, k_u):
    if not (tau > tau_l and tau < tau0 and k > k_l and k < k_u):
        return NEG_INF
    kt = k * tau
    bv = kt * kt
    acc = 0.0
    for i in range(n):
        v = s2[i] + bv
        r = y[i] - mu
        acc += -0.5 * (LOG_2PI + math.log(v)) - 0.5 * (r * r) / v
    r = mu - mu0
    tv = tau * tau
    acc += -0.5 * (LOG_2PI + math.log(tv)) - 0.5 * (r * r) / tv
    acc -= math.log(tau0 - tau_l)
    acc -= math.log(k_u - k_l)
    return acc


def log_posterior(mu, tau, k, y, s2, mu0, tau0, tau_l, k_l, k_u):
    y = [float(v) for v in y]
    s2 = [float(v) for v in s2]
    return _log_post(float(mu), float(tau), float(k), y, s2, len(y),
                     mu0, tau0, tau_l, k_l, k_u)


def _target(z0, z1, z2, y, s2, n, mu0, tau0, tau_l, k_l, k_u):
    tw = tau0 - tau_l
    kw = k_u - k_l
    tau = tau_l + tw * _unit(z1)
    k = k_l + kw * _unit(z2)
    lp = _log_post(z0, tau, k, y, s2, n, mu0, tau0, tau_l, k_l, k_u)
    if lp == NEG_INF:
        return lp, tau, k
    lp += math.log(tw) + _log_jac(z1)
    lp += math.log(kw) + _log_jac(z2)
    return lp, tau, k


def log_target_z(z, y, s2, mu0, tau0, tau_l, k_l, k_u):
    """Log posterior plus log-Jacobian at the unconstrained point ``z``."""
    y = [float(v) for v in y]
    s2 = [float(v) for v in s2]
    return _target(float(z[0]), float(z[1]), float(z[2]), y, s2, len(y),
                   mu0, tau0, tau_l, k_l, k_u)[0]


def rwm_segment(z, logp, chol, eps, log_u, y, s2, mu0, tau0, tau_l, k_l, k_u,
                out_x, out_z):
    """Run ``len(eps)`` random-walk Metropolis steps with a fixed proposal.

    ``z`` (length 3) is updated in place to the final state.  Each step's
    state is written to ``out_x`` (natural scale) and ``out_z``.  Returns
    ``(logp, n_accept)``.
    """
    y = [float(v) for v in y]
    s2 = [float(v) for v in s2]
    n = len(y)
    L = [[float(v) for v in row] for row in chol]
    l00, l10, l11 = L[0][0], L[1][0], L[1][1]
    l20, l21, l22 = L[2][0], L[2][1], L[2][2]
    z0, z1, z2 = float(z[0]), float(z[1]), float(z[2])
    _, tau, k = _target(z0, z1, z2, y, s2, n, mu0, tau0, tau_l, k_l, k_u)
    eps_l = eps.tolist()
    lu = log_u.tolist()
    xs = [None] * len(lu)
    zs = [None] * len(lu)
    n_acc = 0
    for i, (e0, e1, e2) in enumerate(eps_l):
        p0 = z0 + l00 * e0
        p1 = z1 + (l10 * e0 + l11 * e1)
        p2 = z2 + ((l20 * e0 + l21 * e1) + l22 * e2)
        lp_new, tau_new, k_new = _target(p0, p1, p2, y, s2, n,
                                         mu0, tau0, tau_l, k_l, k_u)
        if lu[i] < lp_new - logp:
            z0, z1, z2 = p0, p1, p2
            tau, k = tau_new, k_new
            logp = lp_new
            n_acc += 1
        xs[i] = (z0, tau, k)
        zs[i] = (z0, z1, z2)
    if xs:
        out_x[:] = xs
        out_z[:] = zs
    z[0], z[1], z[2] = z0, z1, z2
    return logp, n_acc


def snis_estimate(mu, tau, f, mu0_prop, mu0_tgt, tau0_tgt):
    """Self-normalised estimate of ``f`` reweighted to the target prior.

    Uses the cancelled weight form: only the normal prior on ``mu`` and the
    target's ``tau_mu`` support differ between proposal and target; the
    constant uniform-normaliser ratio drops out of the ratio estimate.
    Returns ``(estimate, n_covered)``; the estimate is NaN if nothing is
    covered.
    """
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    f = np.asarray(f, dtype=float)
    cov = tau < tau0_tgt
    n_cov = int(np.count_nonzero(cov))
    if n_cov == 0:
        return math.nan, 0
    if n_cov < mu.size:
        mu, tau, f = mu[cov], tau[cov], f[cov]
    dp = mu - mu0_prop
    dt = mu - mu0_tgt
    lw = (dp * dp - dt * dt) * 0.5 / (tau * tau)
    w = np.exp(lw - lw.max())
    return float(np.dot(w, f) / w.sum()), n_cov
