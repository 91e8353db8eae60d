"""Importance weights between posteriors and effective sample sizes.

A chain drawn at hyperparameters ``(mu0', tau0')`` is reweighted to a target
``(mu0, tau0)``.  Likelihood and the ``k`` prior cancel in the ratio; what is
left is the normal prior on ``mu``, the uniform normaliser on ``tau_mu`` and
the target's support indicator ``tau_mu < tau0``.

All weights live in log space.  Estimators and ESS values are invariant to
a common shift, so exponentiating after subtracting the maximum is exact.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeriesError, EmptyOverlapError, InputError, SupportDeficiencyWarning
from .mcmc import Chain, ess_mcmc
from .model import Dataset, Hyperparameters, ModelConstants, log_unnormalized_posterior


@dataclass
class WeightedSample:
    chain: Chain
    target: Hyperparameters
    log_weights: np.ndarray
    uncovered_fraction: float
    support_deficient: bool = False

    def normalized_weights(self) -> np.ndarray:
        """Weights scaled so the largest is 1; zero where ``log_weights`` is ``-inf``."""
        lw = self.log_weights
        mx = lw.max()
        if not math.isfinite(mx):
            raise EmptyOverlapError(f"no draw has positive weight at target {tuple(self.target)}")
        return np.exp(lw - mx)


def importance_log_weights(chain: Chain, target, d: Dataset,
                           c: ModelConstants = ModelConstants(),
                           full_ratio: bool = False) -> WeightedSample:
    """Log importance weights of ``chain`` for the posterior at ``target``.

    With ``full_ratio`` the weights are the difference of two complete log
    posteriors; otherwise the cancelled closed form is used.  Both agree to
    rounding.
    """
    if len(chain) == 0:
        raise InputError("chain has no draws")
    target = Hyperparameters(*map(float, target))
    prop = chain.hyperparameters_used
    c.check(target)
    mu, tau, k = chain.mu, chain.tau_mu, chain.k
    covered = tau < target.tau0
    if full_ratio:
        lw = (log_unnormalized_posterior((mu, tau, k), target, d, c)
              - log_unnormalized_posterior((mu, tau, k), prop, d, c))
    else:
        lw = np.full(mu.shape, -np.inf)
        m, tt = mu[covered], tau[covered]
        dp = m - prop.mu0
        dt = m - target.mu0
        lw[covered] = ((dp * dp - dt * dt) / (2.0 * tt * tt)
                       + math.log((prop.tau0 - c.tau_l) / (target.tau0 - c.tau_l)))
    if not np.any(np.isfinite(lw)):
        raise EmptyOverlapError(
            f"target {tuple(target)} gives zero weight to all {len(chain)} draws "
            f"from proposal {tuple(prop)}")
    deficient = target.tau0 > prop.tau0
    if deficient:
        warnings.warn(
            f"target tau0={target.tau0} exceeds proposal tau0={prop.tau0}: draws "
            "cannot cover tau_mu above the proposal's range; the estimate is "
            "restricted to the covered region", SupportDeficiencyWarning, stacklevel=2)
    return WeightedSample(chain, target, lw, 1.0 - covered.mean(), deficient)


def _aligned(ws: WeightedSample, f_values) -> np.ndarray:
    f = np.asarray(f_values, dtype=float).ravel()
    if f.size != ws.log_weights.size:
        raise InputError("f_values must align with the chain draws")
    return f


def self_normalized_estimate(ws: WeightedSample, f_values) -> float:
    f = _aligned(ws, f_values)
    w = ws.normalized_weights()
    pos = w > 0
    return float(np.dot(w[pos], f[pos]) / w.sum())


def ess_is(ws: WeightedSample) -> float:
    """``(sum w)^2 / sum w^2`` in shifted-exponent space."""
    w = ws.normalized_weights()
    return float(w.sum() ** 2 / np.dot(w, w))


def g_tilde_series(ws: WeightedSample, f_values) -> np.ndarray:
    """``(f_i - estimate) * w_i`` with weights scaled to a maximum of 1."""
    f = _aligned(ws, f_values)
    w = ws.normalized_weights()
    est = self_normalized_estimate(ws, f)
    g = np.zeros_like(w)
    pos = w > 0
    g[pos] = (f[pos] - est) * w[pos]
    return g


def combined_ess(ws: WeightedSample, f_values) -> tuple[float, float, float]:
    """ESS of self-normalised IS over correlated draws.

    Returns ``(ess, ess_is, ess_mcmc_gtilde)`` where
    ``ess = min(ess_mcmc_gtilde / N, 1) * ess_is``.
    """
    f = _aligned(ws, f_values)
    g = g_tilde_series(ws, f)
    n = g.size
    msg = ("the weighted, centred series is constant (is f constant on the "
           "covered draws?); its estimate has no sampling variance and the "
           "combined ESS is undefined")
    # rounding in the estimate leaves tiny nonzero g for constant f
    if np.ptp(f[ws.log_weights > -np.inf]) == 0.0:
        raise DegenerateSeriesError(msg)
    try:
        e_mcmc = ess_mcmc(g)
    except DegenerateSeriesError:
        raise DegenerateSeriesError(msg) from None
    e_is = ess_is(ws)
    return min(e_mcmc / n, 1.0) * e_is, e_is, e_mcmc


def weighted_variance(ws: WeightedSample, f_values) -> float:
    """Self-normalised estimate of the target variance of ``f``."""
    f = _aligned(ws, f_values)
    w = ws.normalized_weights()
    pos = w > 0
    est = np.dot(w[pos], f[pos]) / w.sum()
    return float(np.dot(w[pos], (f[pos] - est) ** 2) / w.sum())


def standard_error(ws: WeightedSample, f_values, ess: float | None = None) -> float:
    """Monte Carlo standard error ``sqrt(Var_p(f) / ESS)``; combined ESS by default."""
    if ess is None:
        ess = combined_ess(ws, f_values)[0]
    return math.sqrt(weighted_variance(ws, f_values) / ess)


def weights_csv_text(ws: WeightedSample, f_values) -> str:
    f = _aligned(ws, f_values)
    g = g_tilde_series(ws, f)
    buf = io.StringIO()
    buf.write("draw_index,log_weight,f_value,g_tilde\n")
    for i, (lw, fv, gv) in enumerate(zip(ws.log_weights, f, g)):
        buf.write(f"{i},{float(lw)!r},{float(fv)!r},{float(gv)!r}\n")
    return buf.getvalue()
