import math

import numpy as np
import pytest

from robustiis.errors import InputError
from robustiis.iis import IISConfig, flat_prior_reference, iterate_lower_bound
from robustiis.mcmc import MCMCConfig, MetropolisSampler, ess_mcmc
from robustiis.model import Dataset
from robustiis.oracle import posterior_mean_mu
from robustiis.prior_set import PriorSet

CFG = IISConfig(ess_target=2000)


@pytest.fixture(scope="module")
def lower(built_sets, synth10):
    return iterate_lower_bound(built_sets["M"], synth10, cfg=CFG)


@pytest.fixture(scope="module")
def upper(built_sets, synth10):
    return iterate_lower_bound(built_sets["M"], synth10, cfg=CFG, direction="upper")


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(ess_target=50), dict(mcmc_ess_margin=-0.1),
                                    dict(max_outer_iterations=0), dict(batch_size=100),
                                    dict(batch_size=5000, draw_budget=1000)])
    def test_invalid(self, kw):
        with pytest.raises(InputError):
            IISConfig(**kw)

    def test_defaults(self):
        c = IISConfig()
        assert c.mcmc_ess_margin == 0.2 and c.max_outer_iterations == 10_000
        assert c.batch_size == 5000 and c.draw_budget == 200_000


class TestLoop:
    def test_converges(self, lower, built_sets):
        assert lower.converged and lower.iterations <= 5
        last = lower.rows[-1]
        assert last.ess > CFG.ess_target
        assert built_sets["M"].contains(lower.t_star)

    def test_chain_follows_previous_minimiser(self, lower):
        assert lower.rows[0].t_current == lower.t0
        for prev, row in zip(lower.rows, lower.rows[1:]):
            assert row.t_current == prev.t_star

    def test_chain_ess_reached(self, lower):
        assert all(r.draws % CFG.batch_size == 0 for r in lower.rows)

    def test_bound_near_oracle(self, lower, synth10):
        exact = posterior_mean_mu(lower.t_star, synth10).mean
        assert abs(lower.bound - exact) < 3 * lower.rows[-1].se

    def test_ordering(self, lower, upper):
        se = math.hypot(lower.rows[-1].se, upper.rows[-1].se)
        assert lower.bound <= upper.bound + 2 * se
        assert upper.converged

    def test_deterministic(self, lower, built_sets, synth10):
        again = iterate_lower_bound(built_sets["M"], synth10, cfg=CFG)
        assert again.csv_text() == lower.csv_text()

    def test_point_set(self, synth10):
        t0 = (10.0, 8.0)
        rep = iterate_lower_bound(PriorSet.point(t0), synth10, cfg=CFG)
        assert rep.converged and rep.iterations == 1
        row = rep.rows[0]
        s = MetropolisSampler(t0, synth10, cfg=MCMCConfig(seed=int(
            np.random.SeedSequence([0, 1]).generate_state(1)[0])))
        xs = s.draw(row.draws)
        assert rep.bound == pytest.approx(xs[:, 0].mean(), rel=1e-12)
        assert row.ess == pytest.approx(ess_mcmc(xs[:, 0]), rel=1e-9)
        assert row.ess_is == row.draws

    def test_constant_f(self, built_sets, synth10):
        rep = iterate_lower_bound(built_sets["M"], synth10, cfg=CFG,
                                  f=lambda x: np.full(len(x), 4.5))
        assert rep.converged and rep.bound == pytest.approx(4.5)
        assert rep.notes and "constant" in rep.notes[0]

    def test_infeasible_start(self, built_sets, synth10):
        with pytest.raises(InputError):
            iterate_lower_bound(built_sets["M"], synth10, cfg=CFG, t0=(95.0, 40.0))

    def test_bad_direction(self, built_sets, synth10):
        with pytest.raises(InputError):
            iterate_lower_bound(built_sets["M"], synth10, cfg=CFG, direction="middle")

    def test_iteration_cap(self, built_sets, synth10):
        rep = iterate_lower_bound(built_sets["M"], synth10, t0=(40.0, 12.0),
                                  cfg=IISConfig(ess_target=2000, max_outer_iterations=1))
        assert rep.iterations == 1 and not rep.converged and rep.abort_reason is None

    def test_draw_budget_abort(self, built_sets, synth10):
        cfg = IISConfig(ess_target=5000, batch_size=1000, draw_budget=2000)
        rep = iterate_lower_bound(built_sets["M"], synth10, cfg=cfg)
        assert not rep.converged and "budget" in rep.abort_reason
        assert "aborted" in rep.table()


class TestReport:
    def test_csv(self, lower):
        lines = lower.csv_text().splitlines()
        assert lines[0] == "iteration,draws,mu0_star,tau0_star,ess,ess_mcmc,ess_is,estimate,seconds"
        assert len(lines) == lower.iterations + 1
        assert lines[1].endswith(",")
        assert not lower.csv_text(include_time=True).splitlines()[1].endswith(",")

    def test_table(self, lower):
        text = lower.table()
        assert "converged" in text and f"{lower.bound:.4f}" in text


class TestFlatReference:
    def test_matches_oracle(self, synth10):
        mean, se = flat_prior_reference(synth10, n_draws=50_000)
        assert abs(mean - posterior_mean_mu((0.0, 1000.0), synth10).mean) < 3 * se

    def test_symmetric(self):
        d = Dataset(np.array([-12.0, 12.0]), np.array([3.0, 3.0]))
        mean, se = flat_prior_reference(d, n_draws=50_000)
        assert abs(mean) < 3 * se
