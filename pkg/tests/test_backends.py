import os
import subprocess
import sys

import numpy as np
import pytest

from robustiis import _backend, _kernels_py
from robustiis.isampling import importance_log_weights, self_normalized_estimate
from robustiis.mcmc import MCMCConfig, MetropolisSampler, run_chain
from robustiis.model import log_unnormalized_posterior
from robustiis.optimize import make_objective

BACKENDS = _backend.available()
compiled = pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")


def args(d, t=(5.0, 9.0)):
    return d.effects, d.variances, t[0], t[1], 1.0, 1.0, 5.0


class TestPythonKernels:
    def test_log_posterior_matches_model(self, synth10):
        for x in [(3.0, 2.0, 2.0), (-10.0, 8.5, 4.9), (20.0, 9.5, 1.01), (0.0, 9.5, 5.5)]:
            got = _kernels_py.log_posterior(*x, *args(synth10))
            want = log_unnormalized_posterior(x, (5.0, 9.0), synth10)
            assert got == pytest.approx(want, rel=1e-13) or got == want == -np.inf

    def test_snis_matches_weights(self, synth10):
        ch = run_chain((5.0, 9.0), synth10, cfg=MCMCConfig(seed=1), n_draws=5000)
        for t in [(0.0, 7.0), (30.0, 8.5)]:
            est, n_cov = _kernels_py.snis_estimate(ch.mu, ch.tau_mu, ch.mu, 5.0, *t)
            ws = importance_log_weights(ch, t, synth10)
            assert est == pytest.approx(self_normalized_estimate(ws, ch.mu), rel=1e-12)
            assert n_cov == np.count_nonzero(ch.tau_mu < t[1])

    def test_snis_no_overlap(self):
        est, n_cov = _kernels_py.snis_estimate(np.zeros(3), np.full(3, 5.0), np.ones(3), 0.0, 0.0, 4.0)
        assert n_cov == 0 and np.isnan(est)


@compiled
class TestCompiledAgainstPython:
    def test_log_posterior(self, synth10):
        c = BACKENDS["cython"]
        for x in [(3.0, 2.0, 2.0), (-10.0, 8.5, 4.9), (0.0, 9.5, 5.5)]:
            assert c.log_posterior(*x, *args(synth10)) == _kernels_py.log_posterior(*x, *args(synth10))

    def test_chains_bit_identical(self, synth10):
        out = {}
        for name, k in BACKENDS.items():
            s = MetropolisSampler((5.0, 9.0), synth10, cfg=MCMCConfig(seed=3), kernels=k)
            s.draw(20_000)
            out[name] = s.chain()
        np.testing.assert_array_equal(out["cython"].draws, out["python"].draws)
        assert out["cython"].accept_rate == out["python"].accept_rate

    def test_snis_close(self, synth10):
        ch = run_chain((5.0, 9.0), synth10, cfg=MCMCConfig(seed=2), n_draws=20_000)
        for t in [(0.0, 7.0), (30.0, 8.5), (5.0, 9.0)]:
            a = make_objective(ch, ch.mu, BACKENDS["cython"])(t)
            b = make_objective(ch, ch.mu, BACKENDS["python"])(t)
            assert a == pytest.approx(b, rel=1e-12)

    def test_default_is_compiled(self):
        if not os.environ.get("ROBUSTIIS_PURE_PYTHON"):
            assert _backend.NAME == "cython"


def test_env_forces_python():
    env = dict(os.environ, ROBUSTIIS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import robustiis; print(robustiis.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
