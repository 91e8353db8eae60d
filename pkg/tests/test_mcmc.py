import math
from types import SimpleNamespace

import numpy as np
import pytest

from robustiis import _backend
from robustiis.errors import DegenerateSeriesError, InitializationError, InputError
from robustiis.mcmc import (MCMCConfig, MetropolisSampler, autocorrelation, ess_mcmc, run_chain)
from robustiis.oracle import posterior_mean_mu


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / math.sqrt(1 - phi * phi)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    return x


@pytest.fixture(scope="module")
def chain(synth10):
    return run_chain((0.0, 5.0), synth10, cfg=MCMCConfig(seed=11), n_draws=100_000)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(burn_in=100), dict(batch_size=10),
                                    dict(max_draws=1000, batch_size=5000),
                                    dict(target_accept=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(InputError):
            MCMCConfig(**kw)


class TestChain:
    def test_acceptance_rate(self, chain):
        assert 0.1 < chain.accept_rate < 0.6

    def test_support(self, chain):
        assert np.all((chain.tau_mu > 1.0) & (chain.tau_mu < 5.0))
        assert np.all((chain.k > 1.0) & (chain.k < 5.0))

    def test_matches_oracle(self, chain, synth10):
        mu = chain.mu
        se = mu.std() / math.sqrt(ess_mcmc(mu))
        assert abs(mu.mean() - posterior_mean_mu((0.0, 5.0), synth10).mean) < 3 * se

    def test_split_half_stationarity(self, chain):
        a, b = np.split(chain.mu, 2)
        se = math.hypot(a.std() / math.sqrt(ess_mcmc(a)), b.std() / math.sqrt(ess_mcmc(b)))
        assert abs(a.mean() - b.mean()) < 5 * se

    def test_same_seed_bit_identical(self, synth10):
        a = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=4), n_draws=3000)
        b = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=4), n_draws=3000)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_different_seed_differs(self, synth10):
        a = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=4), n_draws=1000)
        b = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=5), n_draws=1000)
        assert not np.array_equal(a.draws, b.draws)

    def test_batches_equal_one_run(self, synth10):
        s = MetropolisSampler((10.0, 8.0), synth10, cfg=MCMCConfig(seed=9))
        for m in (1000, 2500, 1500):
            s.draw(m)
        one = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=9), n_draws=5000)
        np.testing.assert_array_equal(s.chain().draws, one.draws)

    def test_proposal_frozen_after_burn_in(self, synth10):
        s = MetropolisSampler((10.0, 8.0), synth10, cfg=MCMCConfig(seed=2))
        s.draw(1000)
        chol = s.chol.copy()
        s.draw(1000)
        np.testing.assert_array_equal(chol, s.chol)

    def test_csv(self, synth10):
        c = run_chain((10.0, 8.0), synth10, cfg=MCMCConfig(seed=2), n_draws=1000)
        lines = c.to_csv_text().splitlines()
        assert lines[0] == "draw_index,mu,tau_mu,k"
        assert len(lines) == 1001
        assert [float(v) for v in lines[1].split(",")[1:]] == c.draws[0].tolist()

    def test_zero_acceptance_raises(self, synth10):
        real = _backend.kernels

        def reject_all(z, logp, chol, eps, log_u, *rest):
            out_x, out_z = rest[-2], rest[-1]
            out_z[:] = z
            out_x[:] = 0.0
            return logp, 0

        fake = SimpleNamespace(log_target_z=real.log_target_z, rwm_segment=reject_all)
        s = MetropolisSampler((0.0, 5.0), synth10, kernels=fake)
        with pytest.raises(InitializationError, match="no proposal accepted"):
            s.draw(10)


class TestAutocorrelation:
    def test_white_noise(self):
        n = 10_000
        x = np.random.default_rng(0).standard_normal(n)
        rho = autocorrelation(x, 200)
        assert rho[0] == 1.0
        assert np.mean(np.abs(rho[1:]) < 4 / math.sqrt(n)) >= 0.95

    def test_alternating(self):
        x = (-1.0) ** np.arange(1000)
        assert autocorrelation(x, 5)[1] == pytest.approx(-1.0, abs=2e-3)

    def test_ar1(self):
        assert autocorrelation(ar1(0.5, 100_000, 1), 5)[1] == pytest.approx(0.5, abs=0.02)

    def test_matches_direct_biased_sum(self):
        x = np.random.default_rng(3).standard_normal(300)
        xc = x - x.mean()
        direct = [np.dot(xc[: 300 - k], xc[k:]) / np.dot(xc, xc) for k in range(20)]
        np.testing.assert_allclose(autocorrelation(x, 19), direct, atol=1e-12)

    def test_constant(self):
        with pytest.raises(DegenerateSeriesError):
            autocorrelation(np.ones(50))

    def test_too_short(self):
        with pytest.raises(InputError):
            autocorrelation(np.arange(5.0))


class TestESS:
    def test_iid(self):
        n = 10_000
        e = ess_mcmc(np.random.default_rng(1).standard_normal(n))
        assert 0.8 * n <= e <= 1.2 * n

    def test_ar1(self):
        n = 100_000
        assert ess_mcmc(ar1(0.5, n, 2)) == pytest.approx(n / 3, rel=0.15)

    def test_negative_first_lag(self):
        x = (-1.0) ** np.arange(1000) + 0.01 * np.random.default_rng(0).standard_normal(1000)
        assert ess_mcmc(x) == 1000.0

    def test_bounded_by_n(self):
        for seed in range(5):
            x = np.random.default_rng(seed).standard_normal(500)
            assert 0 < ess_mcmc(x) <= 500

    def test_degenerate(self):
        with pytest.raises(DegenerateSeriesError):
            ess_mcmc(np.full(100, 2.0))
