"""Minimising the reweighted estimate over a prior set.

For a fixed chain the self-normalised estimate is a deterministic function
of the target hyperparameters, so it can be handed to any optimiser.  Two are
provided: simulated annealing with constraint rejection, and exhaustive
evaluation over a regular grid restricted to the set.
"""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _backend
from .errors import EmptyOverlapError, EmptySetError, InputError, StuckError
from .mcmc import Chain, MCMCConfig, MetropolisSampler, ess_mcmc
from .model import Dataset, Hyperparameters, ModelConstants
from .oracle import QuadratureSpec, posterior_mean_mu
from .prior_set import PriorSet, _axis

DIRECTIONS = ("lower", "upper")


@dataclass(frozen=True)
class AnnealingConfig:
    initial_temperature: float | None = None   # None: objective range over probes
    cooling_factor: float = 0.9
    steps_per_temperature: int = 50
    min_temperature: float | None = None       # None: 1e-4 * initial
    proposal_scale: float = 0.1
    n_probes: int = 20
    polish: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cooling_factor < 1.0:
            raise InputError("cooling_factor must lie in (0, 1)")
        if self.initial_temperature is not None and self.initial_temperature <= 0:
            raise InputError("initial_temperature must be positive")
        if self.min_temperature is not None and self.min_temperature <= 0:
            raise InputError("min_temperature must be positive")
        if (self.initial_temperature is not None and self.min_temperature is not None
                and self.min_temperature >= self.initial_temperature):
            raise InputError("min_temperature must be below initial_temperature")
        if self.steps_per_temperature < 1 or self.proposal_scale <= 0:
            raise InputError("steps_per_temperature and proposal_scale must be positive")


@dataclass
class TraceRow:
    step: int
    temperature: float
    mu0: float
    tau0: float
    objective: float
    accepted: bool


@dataclass
class OptimizationResult:
    argmin: Hyperparameters
    value: float
    evaluations: int
    trace: list = field(default_factory=list)
    accepted: int = 0

    def trace_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("step,temperature,mu0,tau0,objective,accepted\n")
        for r in self.trace:
            vals = ",".join(repr(float(v)) for v in (r.temperature, r.mu0, r.tau0, r.objective))
            buf.write(f"{r.step},{vals},{int(r.accepted)}\n")
        return buf.getvalue()


def objective(t, chain: Chain, f_values, d: Dataset | None = None,
              c: ModelConstants | None = None) -> float:
    """Self-normalised estimate of ``f`` under the posterior at ``t``.

    ``d`` and ``c`` are accepted for signature symmetry; the cancelled weight
    form needs neither.
    """
    return make_objective(chain, f_values)(t)


def make_objective(chain: Chain, f_values, kernels=None) -> Callable:
    k = kernels or _backend.kernels
    mu = np.ascontiguousarray(chain.mu)
    tau = np.ascontiguousarray(chain.tau_mu)
    f = np.ascontiguousarray(f_values, dtype=float)
    if f.shape != mu.shape:
        raise InputError("f_values must align with the chain draws")
    mu0_prop = chain.hyperparameters_used.mu0

    def func(t):
        est, n_cov = k.snis_estimate(mu, tau, f, mu0_prop, float(t[0]), float(t[1]))
        if n_cov == 0:
            raise EmptyOverlapError(f"no draw covers target {tuple(t)}")
        return est

    return func


def _safe(func, t):
    try:
        v = func(t)
    except EmptyOverlapError:
        return math.inf
    return v if math.isfinite(v) else math.inf


def _feasible_probe(ps, rng, n, max_tries=100_000):
    lo = np.array([ps.mu0_bounds[0], ps.tau0_bounds[0]])
    out = []
    for _ in range(max_tries):
        p = lo + rng.random(2) * ps.widths
        if ps.contains(p):
            out.append(p)
            if len(out) == n:
                break
    return out


def anneal_minimize(ps: PriorSet, func: Callable, cfg: AnnealingConfig = AnnealingConfig(),
                    start=None, record_trace: bool = False) -> OptimizationResult:
    """Simulated annealing over ``ps`` with proposals outside the set rejected.

    Gaussian steps scaled by ``proposal_scale * box width`` shrink with the
    square root of the temperature; cooling is geometric.  The best point
    ever visited is then refined by a compass search (also confined to the
    set) when ``cfg.polish`` is on.  Evaluations raising
    :class:`EmptyOverlapError` count as ``+inf``.
    """
    rng = np.random.default_rng(cfg.seed)
    x = np.array(ps.nearest_feasible(start), dtype=float)
    n_eval = 1
    fx = _safe(func, x)
    trace = []
    widths = ps.widths
    if not np.any(widths > 0):
        trace.append(TraceRow(0, 0.0, x[0], x[1], fx, False))
        return OptimizationResult(Hyperparameters(*x), fx, n_eval, trace if record_trace else [], 0)

    t0 = cfg.initial_temperature
    if t0 is None:
        vals = [_safe(func, p) for p in _feasible_probe(ps, rng, cfg.n_probes)]
        n_eval += len(vals)
        vals = [v for v in vals + [fx] if math.isfinite(v)]
        spread = (max(vals) - min(vals)) if vals else 0.0
        t0 = spread if spread > 0 else 1.0
    t_min = cfg.min_temperature if cfg.min_temperature is not None else 1e-4 * t0
    if t_min >= t0:
        raise InputError("min_temperature must be below the initial temperature")

    best, fbest = x.copy(), fx
    temp, step, n_feasible, n_acc = t0, 0, 0, 0
    while temp >= t_min:
        scale = cfg.proposal_scale * widths * math.sqrt(temp / t0)
        for _ in range(cfg.steps_per_temperature):
            step += 1
            cand = x + rng.standard_normal(2) * scale
            u = rng.random()
            if not ps.contains(cand):
                if record_trace:
                    trace.append(TraceRow(step, temp, cand[0], cand[1], math.nan, False))
                continue
            n_feasible += 1
            fc = _safe(func, cand)
            n_eval += 1
            accept = fc <= fx or (math.isfinite(fc) and u < math.exp(-(fc - fx) / temp))
            if accept:
                x, fx = cand, fc
                n_acc += 1
                if fc < fbest:
                    best, fbest = cand.copy(), fc
            if record_trace:
                trace.append(TraceRow(step, temp, cand[0], cand[1], fc, accept))
        temp *= cfg.cooling_factor
    if n_feasible == 0:
        raise StuckError(
            f"no feasible proposal over the whole temperature ladder from {tuple(x)}; "
            f"box widths {widths.tolist()}, proposal_scale {cfg.proposal_scale}")
    if cfg.polish:
        best, fbest, extra = _compass(ps, func, best, fbest, widths)
        n_eval += extra
    value = _safe(func, best)
    n_eval += 1
    if not math.isfinite(value):
        raise EmptyOverlapError("every visited point had zero importance weight")
    return OptimizationResult(Hyperparameters(float(best[0]), float(best[1])), value, n_eval,
                              trace, n_acc)


def _compass(ps, func, x, fx, widths, max_eval=2000):
    h = 0.01 * widths
    floor = 1e-7 * np.where(widths > 0, widths, 1.0)
    dirs = [np.array(v, dtype=float) for v in ((1, 0), (-1, 0), (0, 1), (0, -1))]
    n = 0
    while np.any(h > floor) and n < max_eval:
        moved = False
        for d in dirs:
            cand = x + d * h
            if not np.any(d * h) or not ps.contains(cand):
                continue
            fc = _safe(func, cand)
            n += 1
            if fc < fx:
                x, fx, moved = cand, fc, True
                break
        if not moved:
            h = h / 2.0
    return x, fx, n


# -- grid baseline -------------------------------------------------------------

def oracle_estimator(d: Dataset, c: ModelConstants = ModelConstants(),
                     spec: QuadratureSpec = QuadratureSpec()):
    return lambda t: posterior_mean_mu(t, d, c, spec).mean


def reuse_weights_estimator(chain: Chain, f_values):
    return make_objective(chain, f_values)


def fresh_mcmc_estimator(d: Dataset, c: ModelConstants = ModelConstants(),
                         cfg: MCMCConfig = MCMCConfig(), n_draws: int = 20_000,
                         f: Callable | None = None):
    """Independent chain per point, seeded from ``(cfg.seed, mu0, tau0)``.

    Returns ``(mean, standard_error)``; the error uses the MCMC ESS.
    """
    def run(t):
        key = [cfg.seed] + [int(v) for v in np.frombuffer(np.array(t, dtype=float).tobytes(), np.uint32)]
        seed = int(np.random.SeedSequence(key).generate_state(1)[0])
        s = MetropolisSampler(t, d, c, replace(cfg, seed=seed))
        xs = s.draw(n_draws)
        vals = xs[:, 0] if f is None else np.asarray(f(xs), dtype=float)
        se = math.sqrt(np.var(vals) / ess_mcmc(vals))
        return float(vals.mean()), se
    return run


def grid_minimize(ps: PriorSet, resolution: int, estimator: Callable,
                  direction: str = "lower", threads: int = 1) -> OptimizationResult:
    """Evaluate ``estimator`` on every feasible point of a regular grid.

    ``estimator(t)`` returns a value or ``(value, standard_error)``.  For
    ``direction="upper"`` the maximiser is returned.  ``value`` and the trace
    are in the estimator's own scale.
    """
    if direction not in DIRECTIONS:
        raise InputError(f"direction must be one of {DIRECTIONS}")
    if int(resolution) < 1:
        raise InputError("resolution must be at least 1")
    res = int(resolution)
    mus = _axis(ps.mu0_bounds, res) if res > 1 else np.array([sum(ps.mu0_bounds) / 2])
    taus = _axis(ps.tau0_bounds, res) if res > 1 else np.array([sum(ps.tau0_bounds) / 2])
    pts = [(float(m), float(t)) for m in mus for t in taus if ps.contains((m, t))]
    if not pts:
        raise EmptySetError(f"no feasible point on a {res}x{res} grid over the set")

    def one(p):
        out = estimator(Hyperparameters(*p))
        return out if isinstance(out, tuple) else (out, math.nan)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pts))
    else:
        results = [one(p) for p in pts]
    vals = np.array([r[0] for r in results])
    sign = 1.0 if direction == "lower" else -1.0
    i = int(np.argmin(sign * vals))
    trace = [GridRow(p[0], p[1], v, se) for p, (v, se) in zip(pts, results)]
    return OptimizationResult(Hyperparameters(*pts[i]), float(vals[i]), len(pts), trace, 0)


@dataclass
class GridRow:
    mu0: float
    tau0: float
    estimate: float
    se: float = math.nan


def grid_csv_text(result: OptimizationResult, extra: dict | None = None) -> str:
    """``mu0,tau0,estimate`` rows (plus any per-point ``extra`` columns)."""
    extra = extra or {}
    names = list(extra)
    buf = io.StringIO()
    buf.write(",".join(["mu0", "tau0", "estimate"] + names) + "\n")
    for i, r in enumerate(result.trace):
        cols = [repr(float(v)) for v in (r.mu0, r.tau0, r.estimate)]
        cols += [repr(float(extra[n][i])) for n in names]
        buf.write(",".join(cols) + "\n")
    return buf.getvalue()
