import warnings

import numpy as np
import pytest

from robustiis.model import Dataset, ModelConstants
from robustiis.prior_set import ElicitationSpec, build_prior_set
from robustiis.simulate import simulate_dataset

# elicited ranges for the default set and the one shifted above the data
RANGES = {"M": (-20.0, 80.0), "M_shift": (30.0, 100.0)}


@pytest.fixture(scope="session")
def synth10():
    """The 10-study synthetic dataset used throughout the suite."""
    return simulate_dataset(10, seed=3)


@pytest.fixture(scope="session")
def tiny():
    return Dataset(np.array([0.0, 0.0]), np.array([1.0, 1.0]), "tiny")


@pytest.fixture(scope="session")
def consts():
    return ModelConstants()


@pytest.fixture(scope="session")
def built_sets():
    """Prior sets for both elicited ranges from a 100x100 scan."""
    out = {}
    for name, (lo, hi) in RANGES.items():
        spec = ElicitationSpec(lo, hi, resolution=(100, 100), mc_samples_per_cell=2000, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out[name] = build_prior_set(spec)[0]
    return out
