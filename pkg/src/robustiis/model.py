"""Bayesian random-effects meta-analysis model.

Studies report an effect ``y_i`` with known standard error ``sigma_i``.  In
marginal form::

    y_i | mu, k, tau_mu   ~ N(mu, sigma_i**2 + k**2 * tau_mu**2)
    mu | tau_mu           ~ N(mu0, tau_mu**2)
    tau_mu                ~ U(tau_l, tau0)
    k                     ~ U(k_l, k_u)

The per-study effects are integrated out; a posterior state is the triple
``(mu, tau_mu, k)``.  A prior in the robust set is indexed by the
hyperparameters ``(mu0, tau0)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InputError

LOG_2PI = math.log(2.0 * math.pi)

CSV_HEADER = ("study_id", "effect", "std_error")


class Hyperparameters(NamedTuple):
    mu0: float
    tau0: float


class ParameterState(NamedTuple):
    mu: float
    tau_mu: float
    k: float


@dataclass(frozen=True)
class ModelConstants:
    tau_l: float = 1.0
    k_l: float = 1.0
    k_u: float = 5.0

    def __post_init__(self):
        vals = (self.tau_l, self.k_l, self.k_u)
        if not all(math.isfinite(v) for v in vals):
            raise InputError("model constants must be finite")
        if self.tau_l <= 0 or self.k_l <= 0 or self.k_u <= self.k_l:
            raise InputError(
                f"need tau_l > 0, k_l > 0 and k_u > k_l, got {vals}")

    def check(self, t: Hyperparameters) -> None:
        """Raise :class:`InputError` unless ``t`` indexes a proper prior."""
        mu0, tau0 = t
        if not (math.isfinite(mu0) and math.isfinite(tau0)):
            raise InputError(f"hyperparameters must be finite, got {tuple(t)}")
        if tau0 <= self.tau_l:
            raise InputError(
                f"tau0={tau0} must exceed tau_l={self.tau_l}; "
                "the uniform prior on tau_mu would be empty")


@dataclass(frozen=True)
class Dataset:
    """Study-level effects and standard errors (both in the data's units)."""

    effects: np.ndarray
    std_errors: np.ndarray
    label: str = ""
    study_ids: tuple = field(default=(), compare=False)

    def __post_init__(self):
        y = np.array(self.effects, dtype=float).ravel()
        s = np.array(self.std_errors, dtype=float).ravel()
        if y.shape != s.shape:
            raise InputError("effects and std_errors differ in length")
        if y.size < 2:
            raise InputError("a dataset needs at least two studies")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(s))):
            raise InputError("effects and std_errors must be finite")
        if np.any(s <= 0):
            raise InputError("std_errors must be positive")
        y.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "effects", y)
        object.__setattr__(self, "std_errors", s)
        ids = tuple(self.study_ids) or tuple(str(i + 1) for i in range(y.size))
        if len(ids) != y.size:
            raise InputError("study_ids must align with effects")
        object.__setattr__(self, "study_ids", ids)

    def __len__(self):
        return self.effects.size

    @property
    def variances(self) -> np.ndarray:
        return self.std_errors ** 2

    def negated(self) -> "Dataset":
        return Dataset(-self.effects, self.std_errors, self.label, self.study_ids)

    def shifted(self, delta: float) -> "Dataset":
        return Dataset(self.effects + delta, self.std_errors, self.label, self.study_ids)

    # -- CSV ---------------------------------------------------------------

    @classmethod
    def from_csv(cls, path, negate_effects: bool = False, label: str | None = None) -> "Dataset":
        with open(path, newline="", encoding="utf-8") as fh:
            text = fh.read()
        return cls.from_csv_text(text, negate_effects=negate_effects,
                                 label=str(path) if label is None else label)

    @classmethod
    def from_csv_text(cls, text: str, negate_effects: bool = False, label: str = "") -> "Dataset":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        reader = csv.DictReader(lines)
        if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != CSV_HEADER:
            raise InputError(f"dataset header must be {','.join(CSV_HEADER)}")
        ids, y, s = [], [], []
        for row in reader:
            try:
                ids.append(row["study_id"].strip())
                y.append(float(row["effect"]))
                s.append(float(row["std_error"]))
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad dataset row {row!r}: {exc}") from None
        d = cls(np.array(y), np.array(s), label, tuple(ids))
        return d.negated() if negate_effects else d

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for sid, y, s in zip(self.study_ids, self.effects, self.std_errors):
            w.writerow((sid, repr(float(y)), repr(float(s))))
        return buf.getvalue()


def _log_normal_pdf(x, mean, var):
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * (x - mean) ** 2 / var


def log_likelihood(mu, tau_mu, k, d: Dataset):
    """Marginal log-likelihood, vectorised over ``mu``, ``tau_mu``, ``k``."""
    mu = np.asarray(mu, dtype=float)
    between = (np.asarray(k, dtype=float) * np.asarray(tau_mu, dtype=float)) ** 2
    var = d.variances + between[..., None]
    return _log_normal_pdf(d.effects, mu[..., None], var).sum(axis=-1)


def log_unnormalized_posterior(x, t: Hyperparameters, d: Dataset,
                               c: ModelConstants = ModelConstants()):
    """Log of likelihood times prior at ``x = (mu, tau_mu, k)``.

    The uniform-prior normalisers ``1/(tau0 - tau_l)`` and ``1/(k_u - k_l)``
    are kept, so differences across hyperparameters are exact log density
    ratios.  Out-of-support states give ``-inf``.  ``x`` may hold arrays, in
    which case the result is an array of the broadcast shape.
    """
    t = Hyperparameters(*t)
    c.check(t)
    mu, tau, k = (np.asarray(v, dtype=float) for v in x)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(tau)) and np.all(np.isfinite(k))):
        raise InputError("parameter state must be finite")
    mu, tau, k = np.broadcast_arrays(mu, tau, k)
    inside = (tau > c.tau_l) & (tau < t.tau0) & (k > c.k_l) & (k < c.k_u)
    out = np.full(mu.shape, -np.inf)
    if np.any(inside):
        m, tt, kk = mu[inside], tau[inside], k[inside]
        out[inside] = (log_likelihood(m, tt, kk, d)
                       + _log_normal_pdf(m, t.mu0, tt ** 2)
                       - math.log(t.tau0 - c.tau_l)
                       - math.log(c.k_u - c.k_l))
    return out if out.ndim else float(out)


def prior_predictive_sample(t: Hyperparameters, c: ModelConstants, m: int,
                            rng_seed) -> np.ndarray:
    """Draw ``m`` effects of a new study from the prior predictive.

    Ancestral sampling of ``tau_mu``, ``k``, ``mu`` and finally the
    study-specific effect ``delta* ~ N(mu, k**2 tau_mu**2)``.
    ``rng_seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if int(m) < 1:
        raise InputError("need at least one prior-predictive draw")
    t = Hyperparameters(*t)
    c.check(t)
    rng = np.random.default_rng(rng_seed)
    tau = rng.uniform(c.tau_l, t.tau0, int(m))
    k = rng.uniform(c.k_l, c.k_u, int(m))
    mu = rng.normal(t.mu0, tau)
    return rng.normal(mu, k * tau)
