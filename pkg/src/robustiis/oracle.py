"""Deterministic posterior mean of ``mu`` by partial closed-form integration.

For fixed ``(tau_mu, k)`` the unnormalised posterior is Gaussian in ``mu``::

    exp(-(a mu**2 - 2 b mu + c) / 2)

so the ``mu`` integral is analytic.  What remains is a smooth integral over
the box ``(tau_l, tau0) x (k_l, k_u)``, done here with tensor Gauss-Legendre
in ``(log tau_mu, k)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AccuracyError, AccuracyWarning, InputError
from .model import Dataset, Hyperparameters, ModelConstants

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

# refinement thresholds on the relative change of the mean when nodes double
CONVERGED_RTOL = 1e-6
FAILED_RTOL = 1e-3


class ABCCoefficients(NamedTuple):
    a: float
    b: float
    c: float


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_axis: int = 64
    rule: str = "gauss-legendre"

    def __post_init__(self):
        if int(self.nodes_per_axis) < 8:
            raise InputError("nodes_per_axis must be at least 8")
        if self.rule != "gauss-legendre":
            raise InputError(f"unknown quadrature rule {self.rule!r}")


@dataclass(frozen=True)
class OracleResult:
    mean: float
    normalization: float
    log_normalization: float
    nodes_per_axis: int
    delta: float
    warning: str | None = None


def abc_coefficients(tau_mu, k, t: Hyperparameters, d: Dataset) -> ABCCoefficients:
    """Quadratic-form coefficients of the exponent in ``mu``.

    Vectorised: array ``tau_mu``/``k`` give arrays of coefficients.
    """
    tau_mu = np.asarray(tau_mu, dtype=float)
    k = np.asarray(k, dtype=float)
    if np.any(tau_mu <= 0) or np.any(k <= 0):
        raise InputError("tau_mu and k must be positive")
    mu0 = float(t[0])
    prec = 1.0 / (d.variances + ((k * tau_mu) ** 2)[..., None])
    p0 = 1.0 / tau_mu ** 2
    a = prec.sum(axis=-1) + p0
    b = (prec * d.effects).sum(axis=-1) + mu0 * p0
    c = (prec * d.effects ** 2).sum(axis=-1) + mu0 ** 2 * p0
    if a.ndim == 0:
        return ABCCoefficients(float(a), float(b), float(c))
    return ABCCoefficients(a, b, c)


def _check_a(a):
    if np.any(np.asarray(a) <= 0):
        raise InputError("coefficient a must be positive")


def log_lemma1_integral(coef) -> float:
    """``log`` of the integral of ``exp(-(a x^2 - 2 b x + c)/2)`` over the line."""
    a, b, c = coef
    _check_a(a)
    return HALF_LOG_2PI - 0.5 * np.log(a) - 0.5 * (c - b * b / a)


def lemma1_integral(coef) -> float:
    return np.exp(log_lemma1_integral(coef))


def lemma2_integral(coef) -> float:
    """Integral of ``x exp(-(a x^2 - 2 b x + c)/2)`` over the line."""
    a, b, _ = coef
    return lemma1_integral(coef) * b / a


def _gauss_legendre(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _integrate(t: Hyperparameters, d: Dataset, c: ModelConstants, n: int):
    """Return ``(mean, log_normalization)`` with ``n`` nodes per axis."""
    # nodes in log(tau_mu): the Jacobian tau_mu cancels the 1/tau_mu weight
    # and long tau ranges (vague priors) stay resolved
    us, wt = _gauss_legendre(math.log(c.tau_l), math.log(t.tau0), n)
    ks, wk = _gauss_legendre(c.k_l, c.k_u, n)
    T, K = np.meshgrid(np.exp(us), ks, indexing="ij")
    var = d.variances + ((K * T) ** 2)[..., None]
    prec = 1.0 / var
    p0 = 1.0 / T ** 2
    a = prec.sum(axis=-1) + p0
    b = (prec * d.effects).sum(axis=-1) + t.mu0 * p0
    m = b / a
    # c - b^2/a written as a weighted sum of squares: no cancellation
    resid = (prec * (d.effects - m[..., None]) ** 2).sum(axis=-1) + p0 * (t.mu0 - m) ** 2
    log_w = -0.5 * np.log(var).sum(axis=-1)
    log_inner = log_w + HALF_LOG_2PI - 0.5 * np.log(a) - 0.5 * resid
    log_q = log_inner + np.log(np.outer(wt, wk))
    shift = log_q.max()
    q = np.exp(log_q - shift)
    den = q.sum()
    mean = float((q * m).sum() / den)
    return mean, float(shift + math.log(den))


def posterior_mean_mu(t, d: Dataset, c: ModelConstants = ModelConstants(),
                      spec: QuadratureSpec = QuadratureSpec()) -> OracleResult:
    """Posterior mean of ``mu`` under the prior indexed by ``t``.

    The mean is computed at ``n`` and ``2n`` nodes per axis; the finer value
    is returned and ``delta`` is the absolute change.  The relative change is
    measured against ``max(|mean|, 1)`` so a mean near zero is not flagged
    spuriously.  ``normalization`` integrates the product of the likelihood
    and the normal prior on ``mu``, without the uniform-prior constants and
    without the ``(2 pi)**(-(N+1)/2)`` factors of the normal densities.
    """
    t = Hyperparameters(*map(float, t))
    c.check(t)
    n = int(spec.nodes_per_axis)
    coarse, _ = _integrate(t, d, c, n)
    mean, log_norm = _integrate(t, d, c, 2 * n)
    delta = abs(mean - coarse)
    rel = delta / max(abs(mean), 1.0)
    warning = None
    if rel > FAILED_RTOL:
        raise AccuracyError(
            f"quadrature not converged at {t}: relative change {rel:.3g} "
            f"between {n} and {2 * n} nodes per axis")
    if rel > CONVERGED_RTOL:
        warning = f"relative change {rel:.3g} on doubling nodes exceeds {CONVERGED_RTOL}"
        warnings.warn(warning, AccuracyWarning, stacklevel=2)
    norm = math.exp(log_norm) if log_norm < 700 else math.inf
    return OracleResult(mean, norm, log_norm, 2 * n, delta, warning)
