"""Compact hyperparameter sets elicited by prior-predictive coverage.

A prior ``(mu0, tau0)`` complies when at least a fraction ``h`` of the
prior-predictive effects of a new study fall inside the elicited range
``R``.  Compliance is scanned on a regular grid, the compliant region's
edge is extracted column by column, and a quadratic ``tau0 = q(mu0)`` is
fitted to it.  The set is the bounding box of the compliant cells
intersected with the compliant side of ``q``, widened by ``margin``::

    side "below":  tau0 <= q(mu0) + margin
    side "above":  tau0 >= q(mu0) - margin

Written with ``r = tau0 - q(mu0)`` this is ``s * r + margin >= 0`` where
``s = -1`` below and ``+1`` above.
"""
from __future__ import annotations

import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptySetError, InputError, MonotonicityWarning
from .model import Hyperparameters, ModelConstants, prior_predictive_sample

SIDES = ("below", "above")


@dataclass(frozen=True)
class ElicitationSpec:
    low: float
    high: float
    coverage: float = 0.9
    mu0_range: tuple = (-100.0, 100.0)
    tau0_range: tuple = (5.0, 50.0)
    resolution: tuple = (200, 200)
    mc_samples_per_cell: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not self.low < self.high:
            raise InputError("elicited range needs low < high")
        if not 0.0 < self.coverage < 1.0:
            raise InputError("target coverage must lie in (0, 1)")
        if self.mu0_range[0] > self.mu0_range[1] or self.tau0_range[0] > self.tau0_range[1]:
            raise InputError("grid ranges must be increasing")
        if min(self.resolution) < 1 or self.mc_samples_per_cell < 1:
            raise InputError("grid resolution and sample count must be positive")
        for name in ("mu0_range", "tau0_range", "resolution"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def grid(self):
        n_mu, n_tau = (int(r) for r in self.resolution)
        return (np.linspace(*self.mu0_range, n_mu) if n_mu > 1 else np.array([self.mu0_range[0]]),
                np.linspace(*self.tau0_range, n_tau) if n_tau > 1 else np.array([self.tau0_range[0]]))


@dataclass(frozen=True)
class PriorSet:
    mu0_bounds: tuple
    tau0_bounds: tuple
    coefficients: tuple = (0.0, 0.0, 0.0)
    margin: float = 0.9
    side: str = "below"
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("mu0_bounds", "tau0_bounds", "coefficients"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if self.side not in SIDES:
            raise InputError(f"side must be one of {SIDES}")
        if self.mu0_bounds[0] > self.mu0_bounds[1] or self.tau0_bounds[0] > self.tau0_bounds[1]:
            raise InputError("box bounds must be ordered (lo, hi)")
        if not _any_feasible(self):
            raise EmptySetError(f"prior set is empty: {self.describe()}")

    # -- geometry ----------------------------------------------------------

    def boundary(self, mu0):
        a, b, g = self.coefficients
        mu0 = np.asarray(mu0, dtype=float)
        return a * mu0 ** 2 + b * mu0 + g

    def r(self, mu0, tau0):
        return np.asarray(tau0, dtype=float) - self.boundary(mu0)

    def feasible(self, mu0, tau0):
        """Vectorised membership test."""
        mu0 = np.asarray(mu0, dtype=float)
        tau0 = np.asarray(tau0, dtype=float)
        s = -1.0 if self.side == "below" else 1.0
        return ((mu0 >= self.mu0_bounds[0]) & (mu0 <= self.mu0_bounds[1])
                & (tau0 >= self.tau0_bounds[0]) & (tau0 <= self.tau0_bounds[1])
                & (s * self.r(mu0, tau0) + self.margin >= 0))

    def contains(self, t) -> bool:
        return bool(self.feasible(t[0], t[1]))

    @property
    def widths(self):
        return np.array([self.mu0_bounds[1] - self.mu0_bounds[0],
                         self.tau0_bounds[1] - self.tau0_bounds[0]])

    @property
    def centroid(self):
        return np.array([sum(self.mu0_bounds) / 2, sum(self.tau0_bounds) / 2])

    def lattice(self, resolution=201):
        """Feasible points of a ``resolution x resolution`` lattice on the box."""
        m = _axis(self.mu0_bounds, resolution)
        t = _axis(self.tau0_bounds, resolution)
        M, T = np.meshgrid(m, t, indexing="ij")
        ok = self.feasible(M, T)
        return np.column_stack([M[ok], T[ok]])

    def nearest_feasible(self, point=None, resolution=201) -> Hyperparameters:
        """Feasible lattice point closest to ``point`` (default: box centroid).

        Distances are measured in box-width units.
        """
        p = self.centroid if point is None else np.asarray(point, dtype=float)
        if point is not None and self.contains(p):
            return Hyperparameters(float(p[0]), float(p[1]))
        pts = self.lattice(resolution)
        scale = np.where(self.widths > 0, self.widths, 1.0)
        i = int(np.argmin((((pts - p) / scale) ** 2).sum(axis=1)))
        return Hyperparameters(float(pts[i, 0]), float(pts[i, 1]))

    def describe(self) -> str:
        a, b, g = self.coefficients
        op = "<=" if self.side == "below" else ">="
        sign = "+" if self.side == "below" else "-"
        return (f"{self.mu0_bounds[0]:g} <= mu0 <= {self.mu0_bounds[1]:g}, "
                f"{self.tau0_bounds[0]:g} <= tau0 <= {self.tau0_bounds[1]:g}, "
                f"tau0 {op} ({a:.6g} mu0^2 + {b:.6g} mu0 + {g:.6g}) {sign} {self.margin:g}")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "mu0_bounds": list(self.mu0_bounds),
            "tau0_bounds": list(self.tau0_bounds),
            "coefficients": list(self.coefficients),
            "margin": self.margin,
            "side": self.side,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "PriorSet":
        try:
            return cls(obj["mu0_bounds"], obj["tau0_bounds"], obj.get("coefficients", (0, 0, 0)),
                       obj.get("margin", 0.9), obj.get("side", "below"), obj.get("provenance", {}))
        except KeyError as exc:
            raise InputError(f"prior set JSON lacks {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "PriorSet":
        """Parse JSON text; leading ``#`` comment lines are skipped."""
        body = "\n".join(ln for ln in text.splitlines() if not ln.lstrip().startswith("#"))
        try:
            return cls.from_dict(json.loads(body))
        except json.JSONDecodeError as exc:
            raise InputError(f"prior set is not valid JSON: {exc}") from None

    @classmethod
    def point(cls, t) -> "PriorSet":
        """Degenerate set holding only ``t``."""
        mu0, tau0 = map(float, t)
        return cls((mu0, mu0), (tau0, tau0), (0.0, 0.0, tau0), 0.0, "below")


def contains(ps: PriorSet, t) -> bool:
    return ps.contains(t)


def _axis(bounds, n):
    lo, hi = bounds
    return np.array([lo]) if lo == hi else np.linspace(lo, hi, n)


def _any_feasible(ps: PriorSet) -> bool:
    corners = [(m, t) for m in ps.mu0_bounds for t in ps.tau0_bounds]
    if any(ps.contains(p) for p in corners):
        return True
    return ps.lattice(101).size > 0


# -- elicitation -------------------------------------------------------------

def coverage_proportion(t, spec: ElicitationSpec, c: ModelConstants = ModelConstants(),
                        seed=None) -> float:
    """Fraction of prior-predictive draws at ``t`` landing in ``[low, high]``."""
    t = Hyperparameters(*map(float, t))
    delta = prior_predictive_sample(t, c, spec.mc_samples_per_cell,
                                    spec.seed if seed is None else seed)
    return float(np.count_nonzero((delta >= spec.low) & (delta <= spec.high)) / delta.size)


def scan_coverage(spec: ElicitationSpec, c: ModelConstants = ModelConstants(), threads: int = 1):
    """Coverage on the elicitation grid.

    Returns ``(mu0_axis, tau0_axis, coverage)`` with ``coverage[i, j]`` at
    ``(mu0_axis[i], tau0_axis[j])``.  Cell ``(i, j)`` is seeded with
    ``(spec.seed, i * n_tau + j)``, so results do not depend on ``threads``.
    """
    mus, taus = spec.grid()
    if taus[0] <= c.tau_l:
        raise InputError(f"tau0 grid must stay above tau_l={c.tau_l}")
    n_tau = taus.size

    def column(i):
        return [coverage_proportion((mus[i], taus[j]), spec, c, seed=[spec.seed, i * n_tau + j])
                for j in range(n_tau)]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(column, range(mus.size)))
    else:
        cols = [column(i) for i in range(mus.size)]
    return mus, taus, np.array(cols)


@dataclass
class BuildReport:
    mu0_axis: np.ndarray
    tau0_axis: np.ndarray
    coverage: np.ndarray
    boundary_points: np.ndarray
    side: str
    excluded_fraction: float
    warnings: list = field(default_factory=list)

    def grid_csv_text(self) -> str:
        buf = io.StringIO()
        buf.write("mu0,tau0,coverage\n")
        for i, m in enumerate(self.mu0_axis):
            for j, t in enumerate(self.tau0_axis):
                buf.write(f"{float(m)!r},{float(t)!r},{float(self.coverage[i, j])!r}\n")
        return buf.getvalue()


def _detect_side(ok, taus):
    """Majority vote over mixed columns: compliant cells at low or high tau0?"""
    votes = 0
    for col in ok:
        if col.any() and not col.all():
            votes += 1 if taus[col].mean() < taus[~col].mean() else -1
    return "below" if votes >= 0 else "above"


def _column_boundary(col, taus, side):
    """Edge of the first compliant run scanned from the compliant side.

    Returns ``(tau0, monotone)``.
    """
    idx = np.flatnonzero(col)
    order = range(idx[0], col.size) if side == "below" else range(idx[-1], -1, -1)
    edge = None
    for j in order:
        if not col[j]:
            break
        edge = j
    run = abs(edge - (idx[0] if side == "below" else idx[-1])) + 1
    at_start = (idx[0] == 0) if side == "below" else (idx[-1] == col.size - 1)
    monotone = run == idx.size and at_start
    return taus[edge], monotone


def build_prior_set(spec: ElicitationSpec, c: ModelConstants = ModelConstants(),
                    margin: float = 0.9, threads: int = 1,
                    scan=None) -> tuple[PriorSet, BuildReport]:
    """Scan the grid, fit the compliant region's edge and return the set.

    ``scan`` may supply a precomputed ``(mu0_axis, tau0_axis, coverage)``.
    """
    mus, taus, cov = scan if scan is not None else scan_coverage(spec, c, threads)
    ok = cov >= spec.coverage
    if not ok.any():
        raise EmptySetError(
            f"no grid cell reaches coverage {spec.coverage} of [{spec.low}, {spec.high}]")
    notes = []
    side = _detect_side(ok, taus)
    pts, bad_cols = [], []
    for i, col in enumerate(ok):
        if not col.any():
            continue
        edge, monotone = _column_boundary(col, taus, side)
        if not monotone:
            bad_cols.append(float(mus[i]))
        pts.append((mus[i], edge))
    if bad_cols:
        msg = (f"coverage not monotone in tau0 for {len(bad_cols)} mu0 column(s); "
               "using the first crossing")
        warnings.warn(msg, MonotonicityWarning, stacklevel=2)
        notes.append(msg)
    pts = np.array(pts)
    deg = min(2, len(pts) - 1)
    coef = np.zeros(3)
    if deg > 0:
        coef[2 - deg:] = np.polyfit(pts[:, 0], pts[:, 1], deg)
    else:
        coef[2] = pts[0, 1]
    ii, jj = np.nonzero(ok)
    mu_b = (float(mus[ii].min()), float(mus[ii].max()))
    tau_b = (float(taus[jj].min()), float(taus[jj].max()))
    provenance = {"spec": _jsonable(asdict(spec)), "tau_l": c.tau_l, "k_l": c.k_l,
                  "k_u": c.k_u, "seed": spec.seed}
    ps = PriorSet(mu_b, tau_b, tuple(float(v) for v in coef), float(margin), side, provenance)
    inside = ps.feasible(mus[ii], taus[jj])
    excluded = 1.0 - float(inside.mean())
    return ps, BuildReport(mus, taus, cov, pts, side, excluded, notes)


def _jsonable(obj):
    return json.loads(json.dumps(obj, default=lambda o: list(o) if isinstance(o, tuple) else str(o)))
