import json
import warnings

import numpy as np
import pytest

from oracles import exact_coverage, exact_scan
from robustiis.errors import EmptySetError, InputError
from robustiis.prior_set import (ElicitationSpec, PriorSet, build_prior_set, contains,
                                 coverage_proportion, scan_coverage)

# the published sets, with their reported box and quadratic
PAPER_M = PriorSet((-8.0, 68.0), (5.0, 16.0), (-0.01, 0.46, 9.56), 0.9, "below")
PAPER_M_SHIFT = PriorSet((42.0, 88.0), (5.0, 11.0), (-0.011, 1.427, -35.104), 0.9, "below")


def quiet_build(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_prior_set(*args, **kw)


class TestSpec:
    @pytest.mark.parametrize("kw", [dict(low=1, high=1), dict(coverage=1.0),
                                    dict(mu0_range=(5, -5)), dict(resolution=(0, 10)),
                                    dict(mc_samples_per_cell=0)])
    def test_invalid(self, kw):
        base = dict(low=-20, high=80)
        base.update(kw)
        with pytest.raises(InputError):
            ElicitationSpec(**base)

    def test_defaults(self):
        s = ElicitationSpec(-20, 80)
        assert s.coverage == 0.9 and s.resolution == (200, 200)
        assert s.mc_samples_per_cell == 10_000


class TestCoverage:
    def test_huge_range(self):
        assert coverage_proportion((0.0, 10.0), ElicitationSpec(-1e12, 1e12)) == 1.0

    def test_tiny_range(self):
        spec = ElicitationSpec(0.0, 1e-9, mc_samples_per_cell=10_000)
        assert coverage_proportion((0.0, 10.0), spec) < 1e-3

    def test_against_quadrature(self):
        spec = ElicitationSpec(-20, 80, mc_samples_per_cell=100_000)
        p = exact_coverage(30.0, 6.0, -20, 80)
        got = [coverage_proportion((30.0, 6.0), spec, seed=s) for s in range(3)]
        se = np.sqrt(p * (1 - p) / 1e5)
        np.testing.assert_allclose(got, p, atol=4 * se)
        assert np.ptp(got) < 0.005 * 2

    def test_monotone_in_range(self):
        narrow = ElicitationSpec(-10, 60, mc_samples_per_cell=5000)
        wide = ElicitationSpec(-20, 80, mc_samples_per_cell=5000)
        for t in [(0.0, 6.0), (30.0, 12.0), (70.0, 20.0)]:
            assert coverage_proportion(t, wide, seed=4) >= coverage_proportion(t, narrow, seed=4)

    def test_scan_independent_of_threads(self):
        spec = ElicitationSpec(-20, 80, resolution=(6, 5), mc_samples_per_cell=500, seed=2)
        a = scan_coverage(spec)[2]
        b = scan_coverage(spec, threads=3)[2]
        np.testing.assert_array_equal(a, b)

    def test_scan_rejects_low_tau0(self):
        spec = ElicitationSpec(-20, 80, tau0_range=(0.5, 5), resolution=(3, 3))
        with pytest.raises(InputError):
            scan_coverage(spec)


class TestPriorSet:
    def test_paper_optimum_corner(self):
        assert contains(PAPER_M, (-8.0, 5.0))

    def test_box_violation(self):
        assert not PAPER_M.contains((69.0, 6.0))
        assert not PAPER_M.contains((10.0, 4.9))

    def test_quadratic_constraint(self):
        # at mu0 = 30 the widened boundary lies inside the tau0 range
        q = float(PAPER_M.boundary(30.0))
        assert 5.0 < q + 0.9 < 16.0
        assert PAPER_M.contains((30.0, q + 0.9 - 1e-9))
        assert not PAPER_M.contains((30.0, q + 0.9 + 1e-6))

    def test_closed_boundary(self):
        ps = PriorSet((0.0, 10.0), (2.0, 20.0), (0.0, 0.0, 10.0), 0.5, "below")
        assert ps.contains((5.0, 10.5))
        above = PriorSet((0.0, 10.0), (2.0, 20.0), (0.0, 0.0, 10.0), 0.5, "above")
        assert above.contains((5.0, 9.5)) and not above.contains((5.0, 9.4))

    def test_literal_reading_excludes_corner(self):
        literal = PriorSet(PAPER_M.mu0_bounds, PAPER_M.tau0_bounds, PAPER_M.coefficients,
                           -0.9, "above")
        assert not literal.contains((-8.0, 5.0))

    def test_empty(self):
        with pytest.raises(EmptySetError):
            PriorSet((0.0, 10.0), (20.0, 30.0), (0.0, 0.0, 5.0), 0.0, "below")

    def test_unordered_box(self):
        with pytest.raises(InputError):
            PriorSet((10.0, 0.0), (2.0, 5.0))

    def test_point_set(self):
        ps = PriorSet.point((3.0, 7.0))
        assert ps.contains((3.0, 7.0)) and not ps.contains((3.0, 7.01))
        assert ps.nearest_feasible() == (3.0, 7.0)

    def test_nearest_feasible(self):
        t = PAPER_M.nearest_feasible((100.0, 40.0))
        assert PAPER_M.contains(t)
        assert PAPER_M.nearest_feasible((0.0, 6.0)) == (0.0, 6.0)

    def test_json_roundtrip(self):
        ps = PriorSet((-8.0, 68.0), (5.0, 16.0), (-0.01, 0.46, 9.56), 0.9, "below", {"seed": 3})
        back = PriorSet.from_json("# header line\n" + ps.to_json())
        assert back == ps and back.provenance == {"seed": 3}

    def test_json_missing_key(self):
        with pytest.raises(InputError):
            PriorSet.from_json(json.dumps({"mu0_bounds": [0, 1]}))


class TestBuild:
    def test_all_compliant(self):
        spec = ElicitationSpec(-1e9, 1e9, mu0_range=(-10, 10), tau0_range=(5, 8),
                               resolution=(5, 4), mc_samples_per_cell=100)
        ps, rep = quiet_build(spec)
        assert ps.mu0_bounds == (-10.0, 10.0) and ps.tau0_bounds == (5.0, 8.0)
        assert rep.excluded_fraction == 0.0

    def test_none_compliant(self):
        spec = ElicitationSpec(1000, 1001, resolution=(4, 4), mc_samples_per_cell=100)
        with pytest.raises(EmptySetError):
            build_prior_set(spec)

    def test_exact_scan_reproduces_published_set(self):
        spec = ElicitationSpec(-20, 80)
        ps, rep = quiet_build(spec, scan=exact_scan(spec))
        assert rep.side == "below"
        assert ps.mu0_bounds[0] == pytest.approx(-8, abs=2)
        assert ps.mu0_bounds[1] == pytest.approx(68, abs=2)
        assert ps.tau0_bounds[0] == 5.0
        np.testing.assert_allclose(ps.coefficients, PAPER_M.coefficients, rtol=0.3)
        assert ps.contains((-8.0, 5.0)) or ps.contains(ps.nearest_feasible((-8.0, 5.0)))

    def test_exact_scan_shifted_range(self):
        spec = ElicitationSpec(30, 100)
        ps, _ = quiet_build(spec, scan=exact_scan(spec))
        assert ps.mu0_bounds[0] > 30
        assert ps.mu0_bounds[0] == pytest.approx(42, abs=2)
        assert ps.mu0_bounds[1] == pytest.approx(88, abs=2)
        np.testing.assert_allclose(ps.coefficients, PAPER_M_SHIFT.coefficients, rtol=0.3)

    def test_compliant_cells_inside(self, built_sets):
        spec = ElicitationSpec(-20, 80, resolution=(60, 60), mc_samples_per_cell=2000, seed=1)
        ps, rep = quiet_build(spec)
        mus, taus = spec.grid()
        ii, jj = np.nonzero(rep.coverage >= spec.coverage)
        inside = ps.feasible(mus[ii], taus[jj])
        assert 1 - inside.mean() == pytest.approx(rep.excluded_fraction)
        assert rep.excluded_fraction < 0.05

    def test_shifted_set_moves_right(self, built_sets):
        assert built_sets["M_shift"].mu0_bounds[0] > 30
        assert built_sets["M_shift"].mu0_bounds[0] > built_sets["M"].mu0_bounds[0]

    def test_grid_csv(self):
        spec = ElicitationSpec(-20, 80, resolution=(3, 2), mc_samples_per_cell=100)
        _, rep = quiet_build(spec)
        lines = rep.grid_csv_text().splitlines()
        assert lines[0] == "mu0,tau0,coverage" and len(lines) == 7
        assert lines[1].split(",")[:2] == ["-100.0", "5.0"]

    def test_provenance(self):
        spec = ElicitationSpec(-20, 80, resolution=(10, 10), mc_samples_per_cell=200, seed=5)
        ps, _ = quiet_build(spec)
        assert ps.provenance["seed"] == 5
        assert ps.provenance["spec"]["low"] == -20

    @pytest.mark.slow
    def test_default_monte_carlo_build(self):
        ps, rep = quiet_build(ElicitationSpec(-20, 80, seed=1))
        assert ps.mu0_bounds[0] == pytest.approx(-8, abs=2)
        assert ps.mu0_bounds[1] == pytest.approx(68, abs=2)
        assert ps.tau0_bounds[0] == 5.0
        np.testing.assert_allclose(ps.coefficients, PAPER_M.coefficients, rtol=0.3)
