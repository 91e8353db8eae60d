"""Adaptive random-walk Metropolis and autocorrelation-based ESS.

The walk runs on an unconstrained scale: ``mu`` as is, ``tau_mu`` and ``k``
through a scaled logit onto their prior boxes.  The proposal covariance is
tuned during burn-in only and frozen afterwards, so the recorded draws are a
time-homogeneous Markov chain.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DegenerateSeriesError, InitializationError, InputError
from .model import Dataset, Hyperparameters, ModelConstants

ADAPT_WINDOW = 100
DEFAULT_MAX_LAG = 10_000


@dataclass(frozen=True)
class MCMCConfig:
    burn_in: int = 2000
    batch_size: int = 5000
    max_draws: int = 200_000
    target_accept: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 500:
            raise InputError("burn_in must be at least 500")
        if self.batch_size < 1000:
            raise InputError("batch_size must be at least 1000")
        if self.max_draws < self.batch_size:
            raise InputError("max_draws must be at least batch_size")
        if not 0.0 < self.target_accept < 1.0:
            raise InputError("target_accept must lie in (0, 1)")


@dataclass
class Chain:
    """Post burn-in draws, one row per iteration: columns ``mu, tau_mu, k``."""

    draws: np.ndarray
    accept_rate: float
    hyperparameters_used: Hyperparameters
    seed: int
    proposal_chol: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return self.draws.shape[0]

    @property
    def mu(self):
        return self.draws[:, 0]

    @property
    def tau_mu(self):
        return self.draws[:, 1]

    @property
    def k(self):
        return self.draws[:, 2]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("draw_index,mu,tau_mu,k\n")
        for i, (m, t, k) in enumerate(self.draws):
            buf.write(f"{i},{float(m)!r},{float(t)!r},{float(k)!r}\n")
        return buf.getvalue()


class MetropolisSampler:
    """Stateful sampler so a chain can be extended batch by batch.

    Every random number comes from one ``numpy`` generator seeded by
    ``cfg.seed``; extending in batches of any size gives the same draws as
    one long run of the same total length.
    """

    def __init__(self, t, d: Dataset, c: ModelConstants = ModelConstants(),
                 cfg: MCMCConfig = MCMCConfig(), kernels=None):
        self.t = Hyperparameters(*map(float, t))
        c.check(self.t)
        self.d, self.c, self.cfg = d, c, cfg
        self.k = kernels or _backend.kernels
        # separate streams for steps and uniforms so batch sizes never
        # change which random number a given iteration consumes
        self.rng_step, self.rng_u = (np.random.default_rng(s)
                                     for s in np.random.SeedSequence(cfg.seed).spawn(2))
        self._args = (d.effects, d.variances, self.t.mu0, self.t.tau0, c.tau_l, c.k_l, c.k_u)
        self.z = np.array([float(np.mean(d.effects)), 0.0, 0.0])
        self.logp = self.k.log_target_z(self.z, *self._args)
        if not math.isfinite(self.logp):
            raise InitializationError(f"log target not finite at start {self.z}")
        var_mu = (np.var(d.effects) + np.mean(d.variances)) / len(d) + 1e-12
        self.scales = np.array([math.sqrt(var_mu), 1.0, 1.0])
        self.chol = np.diag(self.scales) * (2.38 / math.sqrt(3.0))
        self._blocks: list[np.ndarray] = []
        self.n_accept = 0
        self.n_steps = 0
        self.burned = False

    def _segment(self, m):
        eps = self.rng_step.standard_normal((m, 3))
        log_u = np.log(self.rng_u.random(m))
        out_x = np.empty((m, 3))
        out_z = np.empty((m, 3))
        self.logp, acc = self.k.rwm_segment(
            self.z, self.logp, self.chol, eps, log_u, *self._args, out_x, out_z)
        return out_x, out_z, acc

    def burn_in(self):
        """Tune the proposal over ``cfg.burn_in`` steps, then freeze it."""
        if self.burned:
            return
        n_windows = max(1, self.cfg.burn_in // ADAPT_WINDOW)
        log_scale = 0.0
        base = self.chol.copy()
        history = []
        total_acc = 0
        for w in range(n_windows):
            m = ADAPT_WINDOW if w < n_windows - 1 else self.cfg.burn_in - ADAPT_WINDOW * w
            _, zs, acc = self._segment(m)
            total_acc += acc
            history.append(zs)
            log_scale += (acc / m - self.cfg.target_accept) / math.sqrt(w + 1.0)
            zs_all = np.concatenate(history[len(history) // 2:])
            if zs_all.shape[0] >= 200 and total_acc > 0:
                cov = np.cov(zs_all, rowvar=False)
                cov += 1e-8 * np.eye(3) + 1e-6 * np.diag(np.diag(cov))
                try:
                    base = np.linalg.cholesky(cov) * (2.38 / math.sqrt(3.0))
                except np.linalg.LinAlgError:
                    pass
            self.chol = base * math.exp(log_scale)
        if total_acc == 0:
            raise InitializationError(
                f"no proposal accepted during burn-in at {tuple(self.t)}; "
                f"start z={self.z.tolist()}, scales={self.scales.tolist()}")
        self.burned = True

    def draw(self, m: int) -> np.ndarray:
        """Append ``m`` recorded draws and return them."""
        self.burn_in()
        xs, _, acc = self._segment(int(m))
        self.n_accept += acc
        self.n_steps += int(m)
        self._blocks.append(xs)
        return xs

    def chain(self) -> Chain:
        draws = np.concatenate(self._blocks) if self._blocks else np.empty((0, 3))
        rate = self.n_accept / self.n_steps if self.n_steps else math.nan
        return Chain(draws, rate, self.t, self.cfg.seed, self.chol.copy())


def run_chain(t, d: Dataset, c: ModelConstants = ModelConstants(),
              cfg: MCMCConfig = MCMCConfig(), n_draws: int | None = None) -> Chain:
    """Burn in, then record ``n_draws`` (default ``cfg.max_draws``) draws."""
    s = MetropolisSampler(t, d, c, cfg)
    s.draw(cfg.max_draws if n_draws is None else n_draws)
    return s.chain()


def _as_series(series, min_len=10):
    x = np.asarray(series, dtype=float).ravel()
    if x.size < min_len:
        raise InputError(f"series needs at least {min_len} values")
    if not np.all(np.isfinite(x)):
        raise InputError("series must be finite")
    xc = x - x.mean()
    if not np.any(xc):
        raise DegenerateSeriesError("series is constant; autocorrelation undefined")
    return xc


def autocorrelation(series, max_lag: int | None = None) -> np.ndarray:
    """Biased sample autocorrelation ``rho[0..max_lag]`` (divides by N)."""
    xc = _as_series(series)
    n = xc.size
    max_lag = min(n - 1, DEFAULT_MAX_LAG) if max_lag is None else min(int(max_lag), n - 1)
    size = 1 << (2 * n - 1).bit_length()
    fx = np.fft.rfft(xc, size)
    acov = np.fft.irfft(fx * np.conj(fx), size)[: max_lag + 1]
    c0 = float(np.dot(xc, xc))
    if c0 == 0.0:
        raise DegenerateSeriesError("series has zero variance")
    rho = acov / c0
    rho[0] = 1.0
    return rho


def ess_mcmc(series, max_lag: int | None = None) -> float:
    """``N / (1 + 2 sum rho[1..l])`` truncated before the first negative lag.

    Clamped to ``(0, N]``.
    """
    n = np.asarray(series).size
    rho = autocorrelation(series, max_lag)
    neg = np.flatnonzero(rho[1:] < 0)
    stop = neg[0] if neg.size else rho.size - 1
    tau_int = 1.0 + 2.0 * float(rho[1:1 + stop].sum())
    return float(min(n, n / max(tau_int, 1.0)))
