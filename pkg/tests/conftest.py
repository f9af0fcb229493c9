import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from fleetsim.config import six_region_benchmark
from fleetsim.model import IntervalParams, SystemConfig


@pytest.fixture(scope="session")
def benchmark():
    return six_region_benchmark(75)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def small_config(n=2, m=1, lam=None, mu=None, horizon=1000.0, weight=0.5, seed=None):
    """Random (or given) time-invariant scenario for cross-checks."""
    if lam is None or mu is None:
        gen = np.random.default_rng(seed)
        lam = gen.uniform(0.2, 1.5, size=(n, n)) if lam is None else lam
        mu = gen.uniform(0.5, 2.5, size=(n, n)) if mu is None else mu
    return SystemConfig(
        n_regions=n,
        fleet_size=m,
        intervals=[IntervalParams(request_rates=lam, travel_rates=mu)],
        interval_length=horizon,
        weight=weight,
        horizon=horizon,
    )
