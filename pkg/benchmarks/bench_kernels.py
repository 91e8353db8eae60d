"""Compare the compiled and pure-Python kernels.

Times the three hot paths on the 10-study synthetic dataset:

* ``rwm``   recorded Metropolis draws (burn-in excluded),
* ``snis``  one reweighted estimate over a fixed chain,
* ``anneal`` a full annealing run over a prior set, which calls ``snis``
  a few thousand times.

Usage::

    python3 benchmarks/bench_kernels.py [--draws N] [--repeat R] [--json PATH]
"""
from __future__ import annotations

import argparse
import json
import platform
import statistics
import time

import numpy as np

from robustiis import _backend
from robustiis.mcmc import MCMCConfig, MetropolisSampler
from robustiis.optimize import AnnealingConfig, anneal_minimize, make_objective
from robustiis.prior_set import PriorSet
from robustiis.simulate import simulate_dataset

PRIOR_SET = PriorSet((-8.0, 68.0), (5.0, 16.0), (-0.01, 0.46, 9.56), 0.9, "below")


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times), statistics.median(times)


def bench(draws: int, repeat: int) -> dict:
    d = simulate_dataset(10, seed=3)
    backends = _backend.available()
    results = {}
    reference = None
    for name, k in backends.items():
        s = MetropolisSampler((10.0, 10.0), d, cfg=MCMCConfig(seed=1), kernels=k)
        s.burn_in()
        rwm = _best(lambda: s.draw(draws), repeat)
        chain = s.chain()
        if reference is None:
            reference = chain
        func = make_objective(reference, reference.mu, k)
        snis = _best(lambda: func((0.0, 9.0)), repeat)
        anneal = _best(lambda: anneal_minimize(PRIOR_SET, func, AnnealingConfig(seed=0)), max(1, repeat // 2))
        results[name] = {"rwm": rwm, "snis": snis, "anneal": anneal,
                         "snis_value": func((0.0, 9.0))}
    return results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--draws", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    res = bench(args.draws, args.repeat)
    print(f"# {platform.python_implementation()} {platform.python_version()}, numpy {np.__version__}, "
          f"default backend: {_backend.NAME}")
    print(f"{'kernel':<8} {'backend':<8} {'best (ms)':>10} {'median (ms)':>12} {'speedup':>8}")
    for kernel in ("rwm", "snis", "anneal"):
        base = res["python"][kernel][0]
        for name, r in res.items():
            best, med = r[kernel]
            print(f"{kernel:<8} {name:<8} {1e3 * best:>10.2f} {1e3 * med:>12.2f} {base / best:>7.1f}x")
    if "cython" in res:
        diff = abs(res["cython"]["snis_value"] - res["python"]["snis_value"])
        print(f"# snis estimates differ by {diff:.3e} between backends")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"draws": args.draws, "repeat": args.repeat, "results": res}, fh, indent=2)


if __name__ == "__main__":
    main()
