"""Command-line front end.

Subcommands ``simulate``, ``elicit``, ``bound``, ``grid`` and ``oracle``.
Settings come from defaults, then an optional JSON ``--config`` file, then
flags.  Every file written starts with one ``#`` provenance line naming the
package version, a hash of the effective configuration and the seed.

Exit codes: 0 success, 2 not converged, 1 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .config import NON_SEMANTIC, RunConfig
from .errors import InputError, RobustIISError, SupportDeficiencyWarning
from .iis import IISConfig, iterate_lower_bound
from .isampling import combined_ess, importance_log_weights
from .mcmc import MCMCConfig, run_chain
from .model import Dataset, Hyperparameters, ModelConstants
from .optimize import (AnnealingConfig, fresh_mcmc_estimator, grid_csv_text, grid_minimize,
                       oracle_estimator, reuse_weights_estimator)
from .oracle import QuadratureSpec, posterior_mean_mu
from .prior_set import ElicitationSpec, PriorSet, build_prior_set
from .simulate import EffectDistribution, simulate_dataset

log = logging.getLogger("robustiis")

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the input-error code instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--data", help="study CSV with header study_id,effect,std_error")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--seed", type=int, help="master seed")
    g.add_argument("--out", help="output directory")
    g.add_argument("--threads", type=int, help="worker threads for grid scans")
    g.add_argument("--negate-effects", action="store_true", default=None,
                   help="flip the sign of every effect on load")
    g.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="robustiis", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"robustiis {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    p.add_argument("--n-studies", type=int)

    p = sub.add_parser("elicit", parents=[common], help="build a prior set from coverage")
    p.add_argument("--low", type=float)
    p.add_argument("--high", type=float)
    p.add_argument("--coverage", type=float)
    p.add_argument("--mu0-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--tau0-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--resolution", type=int, nargs=2, metavar=("N_MU0", "N_TAU0"))
    p.add_argument("--samples", type=int, help="prior-predictive draws per grid cell")
    p.add_argument("--margin", type=float)

    p = sub.add_parser("bound", parents=[common], help="iterative importance sampling bound")
    p.add_argument("--prior-set", help="prior set JSON written by 'elicit'")
    p.add_argument("--direction", choices=("lower", "upper"))
    p.add_argument("--ess-target", type=int)
    p.add_argument("--t0", type=float, nargs=2, metavar=("MU0", "TAU0"))
    p.add_argument("--max-iter", type=int)
    p.add_argument("--record-time", action="store_true",
                   help="fill the seconds column (makes output run-dependent)")

    p = sub.add_parser("grid", parents=[common], help="exhaustive grid over the prior set")
    p.add_argument("--prior-set")
    p.add_argument("--direction", choices=("lower", "upper"))
    p.add_argument("--resolution", type=int)
    p.add_argument("--mode", choices=("oracle", "fresh-mcmc", "reuse-weights"))
    p.add_argument("--draws", type=int, help="chain length for the MCMC modes")
    p.add_argument("--proposal", type=float, nargs=2, metavar=("MU0", "TAU0"),
                   help="sampling hyperparameters for reuse-weights")
    p.add_argument("--emit-ess", action="store_true", default=None,
                   help="add ESS columns in reuse-weights mode")

    p = sub.add_parser("oracle", parents=[common], help="quadrature posterior mean of mu")
    p.add_argument("--mu0", type=float)
    p.add_argument("--tau0", type=float)
    p.add_argument("--nodes", type=int, help="Gauss-Legendre nodes per axis")
    return parser


# -- configuration ------------------------------------------------------------

def _set(section, name, value):
    if value is not None:
        setattr(section, name, list(value) if isinstance(value, (list, tuple)) else value)


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in ("seed", "data", "out", "threads", "negate_effects"):
        _set(cfg, name, getattr(args, name, None))
    _set(cfg, "prior_set", getattr(args, "prior_set", None))
    cmd = args.command
    if cmd == "simulate":
        _set(cfg.simulate, "n_studies", args.n_studies)
    elif cmd == "elicit":
        for flag, name in (("low", "low"), ("high", "high"), ("coverage", "coverage"),
                           ("mu0_range", "mu0_range"), ("tau0_range", "tau0_range"),
                           ("resolution", "resolution"), ("samples", "mc_samples_per_cell"),
                           ("margin", "margin")):
            _set(cfg.elicit, name, getattr(args, flag))
    elif cmd == "bound":
        _set(cfg.iis, "direction", args.direction)
        _set(cfg.iis, "ess_target", args.ess_target)
        _set(cfg.iis, "t0", args.t0)
        _set(cfg.iis, "max_outer_iterations", args.max_iter)
    elif cmd == "grid":
        for flag in ("direction", "resolution", "mode", "draws", "proposal", "emit_ess"):
            _set(cfg.grid, flag, getattr(args, flag))
    elif cmd == "oracle":
        _set(cfg.oracle, "mu0", args.mu0)
        _set(cfg.oracle, "tau0", args.tau0)
        _set(cfg.quadrature, "nodes_per_axis", args.nodes)
    if cfg.threads is None or int(cfg.threads) < 1:
        raise InputError("--threads must be at least 1")
    return cfg


def _file_hash(path) -> str | None:
    if path is None:
        return None
    try:
        with open(path, "rb") as fh:
            return "sha256:" + hashlib.sha256(fh.read()).hexdigest()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


class Run:
    """Effective configuration plus output helpers for one invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.digest = cfg.digest(data=_file_hash(cfg.data), prior_set=_file_hash(cfg.prior_set))
        self.header = f"# robustiis {__version__} config={self.digest} seed={cfg.seed}\n"
        os.makedirs(cfg.out, exist_ok=True)
        self.written = []

    def write(self, name: str, body: str) -> str:
        path = os.path.join(self.cfg.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.header + body)
        self.written.append(path)
        return path

    @property
    def constants(self) -> ModelConstants:
        m = self.cfg.model
        return ModelConstants(m.tau_l, m.k_l, m.k_u)

    def dataset(self) -> Dataset:
        if not self.cfg.data:
            raise InputError("this subcommand needs --data")
        try:
            return Dataset.from_csv(self.cfg.data, negate_effects=bool(self.cfg.negate_effects))
        except OSError as exc:
            raise InputError(f"cannot read {self.cfg.data}: {exc.strerror}") from None

    def elicitation_spec(self) -> ElicitationSpec:
        e = self.cfg.elicit
        return ElicitationSpec(e.low, e.high, e.coverage, tuple(e.mu0_range), tuple(e.tau0_range),
                               tuple(e.resolution), e.mc_samples_per_cell, self.cfg.seed)

    def prior_set(self) -> PriorSet:
        if self.cfg.prior_set:
            try:
                with open(self.cfg.prior_set, encoding="utf-8") as fh:
                    return PriorSet.from_json(fh.read())
            except OSError as exc:
                raise InputError(f"cannot read {self.cfg.prior_set}: {exc.strerror}") from None
        log.info("no --prior-set given; building one from the [elicit] settings")
        ps, _ = build_prior_set(self.elicitation_spec(), self.constants,
                                self.cfg.elicit.margin, self.cfg.threads)
        return ps

    def mcmc_config(self, batch_size: int = 5000) -> MCMCConfig:
        m = self.cfg.mcmc
        return MCMCConfig(m.burn_in, batch_size, max(m.max_draws, batch_size),
                          m.target_accept, self.cfg.seed)

    def anneal_config(self) -> AnnealingConfig:
        a = self.cfg.annealing
        return AnnealingConfig(a.initial_temperature, a.cooling_factor, a.steps_per_temperature,
                               a.min_temperature, a.proposal_scale, a.n_probes, a.polish,
                               self.cfg.seed)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- subcommands --------------------------------------------------------------

def cmd_simulate(run: Run, args) -> int:
    s = run.cfg.simulate
    dist = EffectDistribution(s.shape, s.loc, s.scale, s.se_median, s.se_log_sd)
    d = simulate_dataset(s.n_studies, dist, run.cfg.seed)
    if run.cfg.negate_effects:
        d = d.negated()
    path = run.write("data.csv", d.to_csv_text())
    print(f"wrote {len(d)} studies to {path}")
    return EXIT_OK


def cmd_elicit(run: Run, args) -> int:
    ps, report = build_prior_set(run.elicitation_spec(), run.constants,
                                 run.cfg.elicit.margin, run.cfg.threads)
    run.write("prior_set.json", ps.to_json())
    run.write("coverage_grid.csv", report.grid_csv_text())
    print(ps.describe())
    print(f"compliant side: {report.side}; compliant cells outside the set: "
          f"{100 * report.excluded_fraction:.2f}%")
    return EXIT_OK


def cmd_bound(run: Run, args) -> int:
    d, ps = run.dataset(), run.prior_set()
    i = run.cfg.iis
    cfg = IISConfig(i.ess_target, i.mcmc_ess_margin, i.max_outer_iterations, i.batch_size,
                    i.draw_budget, run.cfg.seed, run.cfg.seed)
    report = iterate_lower_bound(ps, d, run.constants, cfg, t0=i.t0,
                                 mcmc=run.mcmc_config(i.batch_size),
                                 anneal=run.anneal_config(), direction=i.direction)
    run.write("iis_report.csv", report.csv_text(include_time=args.record_time))
    run.write("iis_report.txt", report.table(include_time=args.record_time) + "\n")
    last = report.rows[-1] if report.rows else None
    summary = {
        "direction": report.direction,
        "bound": report.bound if math.isfinite(report.bound) else None,
        "t_star": list(report.t_star) if report.t_star else None,
        "standard_error": last.se if last else None,
        "converged": report.converged,
        "iterations": report.iterations,
        "abort_reason": report.abort_reason,
        "notes": report.notes,
        "prior_set": ps.to_dict(),
    }
    run.write("bound.json", _json(summary))
    print(report.table(include_time=True))
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_grid(run: Run, args) -> int:
    d, ps, g = run.dataset(), run.prior_set(), run.cfg.grid
    extra = {}
    if g.mode == "oracle":
        est = oracle_estimator(d, run.constants, QuadratureSpec(run.cfg.quadrature.nodes_per_axis))
    elif g.mode == "fresh-mcmc":
        est = fresh_mcmc_estimator(d, run.constants, run.mcmc_config(), g.draws)
    elif g.mode == "reuse-weights":
        t = Hyperparameters(*g.proposal) if g.proposal else ps.nearest_feasible()
        chain = run_chain(t, d, run.constants, run.mcmc_config(), n_draws=g.draws)
        est = reuse_weights_estimator(chain, chain.mu)
    else:
        raise InputError(f"unknown grid mode {g.mode!r}")
    res = grid_minimize(ps, g.resolution, est, g.direction, run.cfg.threads)
    if g.mode == "fresh-mcmc":
        extra["se"] = [r.se for r in res.trace]
    if g.mode == "reuse-weights" and g.emit_ess:
        cols = {"ess": [], "ess_is": [], "ess_mcmc": []}
        n_deficient = 0
        for r in res.trace:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SupportDeficiencyWarning)
                ws = importance_log_weights(chain, (r.mu0, r.tau0), d, run.constants)
            n_deficient += ws.support_deficient
            try:
                e, e_is, e_mc = combined_ess(ws, chain.mu)
            except RobustIISError:
                e = e_is = e_mc = math.nan
            for k, v in zip(cols, (e, e_is, e_mc)):
                cols[k].append(v)
        extra.update(cols)
        if n_deficient:
            log.warning("%d grid point(s) have tau0 above the proposal tau0 %.4g; their "
                        "estimates only cover the sampled range", n_deficient, chain.hyperparameters_used.tau0)
    run.write("grid.csv", grid_csv_text(res, extra))
    best = {"direction": g.direction, "mode": g.mode, "resolution": g.resolution,
            "argmin": list(res.argmin), "value": res.value, "points": res.evaluations}
    run.write("grid_result.json", _json(best))
    word = "minimum" if g.direction == "lower" else "maximum"
    print(f"{word} {res.value:.6f} at ({res.argmin.mu0:.4f}, {res.argmin.tau0:.4f}) "
          f"over {res.evaluations} feasible grid points")
    return EXIT_OK


def cmd_oracle(run: Run, args) -> int:
    d, o = run.dataset(), run.cfg.oracle
    t = Hyperparameters(float(o.mu0), float(o.tau0))
    r = posterior_mean_mu(t, d, run.constants, QuadratureSpec(run.cfg.quadrature.nodes_per_axis))
    body = "mu0,tau0,mean,nodes,delta\n" + f"{t.mu0!r},{t.tau0!r},{r.mean!r},{r.nodes_per_axis},{r.delta!r}\n"
    run.write("oracle.csv", body)
    sys.stdout.write(body)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "elicit": cmd_elicit, "bound": cmd_bound,
            "grid": cmd_grid, "oracle": cmd_oracle}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        cfg = resolve_config(args)
        run = Run(cfg)
        echo = {k: v for k, v in cfg.to_dict().items() if k not in NON_SEMANTIC}
        run.write("run_config.json", _json(echo))
        start = time.perf_counter()
        with np.errstate(over="ignore", under="ignore"):
            code = COMMANDS[args.command](run, args)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - start)
        return code
    except RobustIISError as exc:
        print(f"robustiis: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"robustiis: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"robustiis: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
