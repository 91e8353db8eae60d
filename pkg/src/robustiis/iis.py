"""Iterative importance sampling for a lower (or upper) posterior expectation.

Each outer iteration samples the posterior at the current hyperparameters
until the chain's own ESS clears the target with a margin, minimises the
reweighted estimate over the prior set, and stops once the combined ESS of
the sample reweighted to the minimiser exceeds the target.  Otherwise the
minimiser becomes the next sampling point.
"""
from __future__ import annotations

import io
import logging
import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DegenerateSeriesError, EmptyOverlapError, InputError, SupportDeficiencyWarning
from .isampling import combined_ess, importance_log_weights, standard_error
from .mcmc import MCMCConfig, MetropolisSampler, ess_mcmc
from .model import Dataset, Hyperparameters, ModelConstants
from .optimize import DIRECTIONS, AnnealingConfig, anneal_minimize, make_objective
from .prior_set import PriorSet

log = logging.getLogger(__name__)

CSV_COLUMNS = ("iteration", "draws", "mu0_star", "tau0_star", "ess", "ess_mcmc",
               "ess_is", "estimate", "seconds")


@dataclass(frozen=True)
class IISConfig:
    ess_target: int = 2000
    mcmc_ess_margin: float = 0.20
    max_outer_iterations: int = 10_000
    batch_size: int = 5000
    draw_budget: int = 200_000
    mcmc_seed: int = 0
    anneal_seed: int = 0

    def __post_init__(self):
        if self.ess_target < 100:
            raise InputError("ess_target must be at least 100")
        if self.mcmc_ess_margin < 0:
            raise InputError("mcmc_ess_margin must be non-negative")
        if self.max_outer_iterations < 1:
            raise InputError("max_outer_iterations must be at least 1")
        if self.batch_size < 1000 or self.draw_budget < self.batch_size:
            raise InputError("need batch_size >= 1000 and draw_budget >= batch_size")


@dataclass
class IterationRow:
    iteration: int
    draws: int
    t_current: Hyperparameters
    t_star: Hyperparameters
    ess: float
    ess_mcmc: float
    ess_is: float
    estimate: float
    se: float
    seconds: float
    support_deficient: bool = False


@dataclass
class IISReport:
    t0: Hyperparameters
    direction: str
    rows: list = field(default_factory=list)
    bound: float = math.nan
    t_star: Hyperparameters | None = None
    converged: bool = False
    iterations: int = 0
    abort_reason: str | None = None
    notes: list = field(default_factory=list)

    def csv_text(self, include_time: bool = False) -> str:
        """Machine-readable rows; ``seconds`` is left blank unless asked for."""
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            secs = f"{r.seconds:.3f}" if include_time else ""
            vals = (r.t_star.mu0, r.t_star.tau0, r.ess, r.ess_mcmc, r.ess_is, r.estimate)
            buf.write(f"{r.iteration},{r.draws}," + ",".join(repr(float(v)) for v in vals)
                      + f",{secs}\n")
        return buf.getvalue()

    def table(self, include_time: bool = True) -> str:
        head = (f"{'Iter':>4} {'Samples':>8} {'mu0*':>9} {'tau0*':>8} {'ESS':>9} "
                f"{'ESS_MCMC':>9} {'ESS_IS':>9} {'estimate':>10}" + (f" {'time':>8}" if include_time else ""))
        lines = [head, f"{0:>4} {'--':>8} {self.t0.mu0:>9.3f} {self.t0.tau0:>8.3f}"]
        for r in self.rows:
            line = (f"{r.iteration:>4} {r.draws:>8} {r.t_star.mu0:>9.3f} {r.t_star.tau0:>8.3f} "
                    f"{r.ess:>9.0f} {r.ess_mcmc:>9.0f} {r.ess_is:>9.0f} {r.estimate:>10.4f}")
            if include_time:
                line += f" {r.seconds:>7.1f}s"
            lines.append(line)
        status = "converged" if self.converged else "NOT converged"
        lines.append(f"{self.direction} bound {self.bound:.4f} at "
                     f"({self.t_star.mu0:.4f}, {self.t_star.tau0:.4f}) "
                     f"[{status}, {self.iterations} iteration(s)]" if self.t_star
                     else f"no bound [{status}]")
        if self.abort_reason:
            lines.append(f"aborted: {self.abort_reason}")
        return "\n".join(lines)


def _mu(draws):
    return draws[:, 0]


def iterate_lower_bound(ps: PriorSet, d: Dataset, c: ModelConstants = ModelConstants(),
                        cfg: IISConfig = IISConfig(), t0=None,
                        mcmc: MCMCConfig = MCMCConfig(),
                        anneal: AnnealingConfig = AnnealingConfig(),
                        direction: str = "lower",
                        f: Callable | None = None) -> IISReport:
    """Run iterative importance sampling and return the per-iteration report.

    ``f`` maps an ``(n, 3)`` array of draws ``(mu, tau_mu, k)`` to values;
    the default is ``mu``.  ``direction="upper"`` minimises ``-f`` and reports
    the maximum.  A step whose minimiser lies above the sampling point's
    ``tau0`` (outside the draws' support) never ends the loop; the next
    iteration samples there instead.
    """
    if direction not in DIRECTIONS:
        raise InputError(f"direction must be one of {DIRECTIONS}")
    f = f or _mu
    sign = 1.0 if direction == "lower" else -1.0
    if t0 is None:
        t0 = ps.nearest_feasible()
    t0 = Hyperparameters(*map(float, t0))
    if not ps.contains(t0):
        raise InputError(f"initial hyperparameters {tuple(t0)} lie outside the prior set")
    c.check(t0)
    report = IISReport(t0, direction)
    t = t0
    need = (1.0 + cfg.mcmc_ess_margin) * cfg.ess_target
    for it in range(1, cfg.max_outer_iterations + 1):
        start = time.perf_counter()
        sampler = MetropolisSampler(t, d, c, replace(
            mcmc, seed=_derive_seed(cfg.mcmc_seed, it), batch_size=cfg.batch_size))
        while True:
            sampler.draw(cfg.batch_size)
            chain = sampler.chain()
            if ess_mcmc(chain.mu) >= need or len(chain) >= cfg.draw_budget:
                break
        if ess_mcmc(chain.mu) < need:
            report.abort_reason = (
                f"iteration {it}: chain ESS {ess_mcmc(chain.mu):.0f} below {need:.0f} "
                f"after the {cfg.draw_budget}-draw budget at {tuple(t)}")
            break
        fv = np.asarray(f(chain.draws), dtype=float)
        func = make_objective(chain, sign * fv)
        try:
            res = anneal_minimize(ps, func, replace(anneal, seed=_derive_seed(cfg.anneal_seed, it)),
                                  start=t)
        except EmptyOverlapError as exc:
            report.abort_reason = f"iteration {it}: {exc}"
            break
        t_star = res.argmin
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SupportDeficiencyWarning)
            ws = importance_log_weights(chain, t_star, d, c)
        estimate = sign * res.value
        try:
            ess, e_is, e_mcmc = combined_ess(ws, fv)
            se = standard_error(ws, fv, ess)
        except DegenerateSeriesError as exc:
            ess, e_is, e_mcmc, se = math.inf, math.nan, math.nan, 0.0
            report.notes.append(f"iteration {it}: {exc}")
        row = IterationRow(it, len(chain), t, t_star, ess, e_mcmc, e_is, estimate, se,
                           time.perf_counter() - start, ws.support_deficient)
        report.rows.append(row)
        log.info("iteration %d: t*=(%.4f, %.4f) estimate=%.5f ESS=%.0f", it, *t_star, estimate, ess)
        report.bound, report.t_star, report.iterations = estimate, t_star, it
        if ess > cfg.ess_target and not ws.support_deficient:
            report.converged = True
            break
        if ws.support_deficient:
            report.notes.append(f"iteration {it}: minimiser tau0 above the sampling tau0; resampling")
        t = t_star
    return report


def _derive_seed(seed: int, iteration: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(iteration)]).generate_state(1)[0])


def flat_prior_reference(d: Dataset, c: ModelConstants = ModelConstants(),
                         t=(0.0, 1000.0), mcmc: MCMCConfig = MCMCConfig(),
                         n_draws: int = 50_000) -> tuple[float, float]:
    """Posterior mean of ``mu`` under a vague prior, with its MCMC standard error."""
    s = MetropolisSampler(t, d, c, mcmc)
    xs = s.draw(n_draws)
    mu = xs[:, 0]
    return float(mu.mean()), math.sqrt(float(np.var(mu)) / ess_mcmc(mu))
