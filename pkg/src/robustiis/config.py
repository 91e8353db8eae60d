"""Run configuration for the command-line tool.

A JSON file with one object per section; command-line flags override file
values.  Every field has a default, and ``RunConfig.from_dict(cfg.to_dict())``
round-trips exactly.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from .errors import InputError


@dataclass
class ModelSection:
    tau_l: float = 1.0
    k_l: float = 1.0
    k_u: float = 5.0


@dataclass
class SimulateSection:
    n_studies: int = 75
    shape: float = 2.585
    loc: float = 0.905
    scale: float = 37.10
    se_median: float = 8.0
    se_log_sd: float = 0.5


@dataclass
class ElicitSection:
    low: float = -20.0
    high: float = 80.0
    coverage: float = 0.9
    mu0_range: list = field(default_factory=lambda: [-100.0, 100.0])
    tau0_range: list = field(default_factory=lambda: [5.0, 50.0])
    resolution: list = field(default_factory=lambda: [200, 200])
    mc_samples_per_cell: int = 10_000
    margin: float = 0.9


@dataclass
class MCMCSection:
    burn_in: int = 2000
    max_draws: int = 200_000
    target_accept: float = 0.3


@dataclass
class AnnealSection:
    initial_temperature: float | None = None
    cooling_factor: float = 0.9
    steps_per_temperature: int = 50
    min_temperature: float | None = None
    proposal_scale: float = 0.1
    n_probes: int = 20
    polish: bool = True


@dataclass
class IISSection:
    ess_target: int = 5000
    mcmc_ess_margin: float = 0.20
    max_outer_iterations: int = 10_000
    batch_size: int = 5000
    draw_budget: int = 200_000
    direction: str = "lower"
    t0: list | None = None


@dataclass
class GridSection:
    resolution: int = 25
    mode: str = "oracle"
    draws: int = 20_000
    proposal: list | None = None
    direction: str = "lower"
    emit_ess: bool = False


@dataclass
class QuadratureSection:
    nodes_per_axis: int = 64


@dataclass
class OracleSection:
    mu0: float = 0.0
    tau0: float = 1000.0


SECTIONS = {
    "model": ModelSection,
    "simulate": SimulateSection,
    "elicit": ElicitSection,
    "mcmc": MCMCSection,
    "annealing": AnnealSection,
    "iis": IISSection,
    "grid": GridSection,
    "quadrature": QuadratureSection,
    "oracle": OracleSection,
}

# fields that cannot change any output file; left out of the config hash
NON_SEMANTIC = ("out", "threads")


@dataclass
class RunConfig:
    seed: int = 0
    data: str | None = None
    prior_set: str | None = None
    negate_effects: bool = False
    out: str = "."
    threads: int = 1
    model: ModelSection = field(default_factory=ModelSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    elicit: ElicitSection = field(default_factory=ElicitSection)
    mcmc: MCMCSection = field(default_factory=MCMCSection)
    annealing: AnnealSection = field(default_factory=AnnealSection)
    iis: IISSection = field(default_factory=IISSection)
    grid: GridSection = field(default_factory=GridSection)
    quadrature: QuadratureSection = field(default_factory=QuadratureSection)
    oracle: OracleSection = field(default_factory=OracleSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        top = {f.name for f in fields(cls)}
        unknown = set(obj) - top
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, val in obj.items():
            if key in SECTIONS:
                sec = SECTIONS[key]
                names = {f.name for f in fields(sec)}
                bad = set(val) - names
                if bad:
                    raise InputError(f"unknown keys in [{key}]: {sorted(bad)}")
                if not isinstance(val, dict):
                    raise InputError(f"config section [{key}] must be an object")
                kwargs[key] = sec(**val)
            else:
                kwargs[key] = val
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> "RunConfig":
        """Read a JSON config; ``#`` comment lines are skipped."""
        with open(path, encoding="utf-8") as fh:
            body = "\n".join(ln for ln in fh if not ln.lstrip().startswith("#"))
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise InputError(f"config {path} must hold a JSON object")
        return cls.from_dict(obj)

    def digest(self, **replace) -> str:
        """Short hash of every setting that can change an output.

        Keyword arguments override top-level entries before hashing; the
        front end passes content hashes for the input file paths so moving
        a file does not change the digest.
        """
        d = {k: v for k, v in self.to_dict().items() if k not in NON_SEMANTIC}
        d.update(replace)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
