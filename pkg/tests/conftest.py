import datetime as dt
import pathlib

import numpy as np
import pytest

from longrun import Observation, TimeSeries

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> pathlib.Path:
    return FIXTURES


def annual_series(values, start_year=1900, label="test") -> TimeSeries:
    obs = tuple(
        Observation(dt.date(start_year + i, 12, 31), v) for i, v in enumerate(values)
    )
    return TimeSeries(obs, label=label)


def quarterly_series(values, start_year=1900, label="test") -> TimeSeries:
    ends = [(3, 31), (6, 30), (9, 30), (12, 31)]
    obs = []
    for i, v in enumerate(values):
        month, day = ends[i % 4]
        obs.append(Observation(dt.date(start_year + i // 4, month, day), v))
    return TimeSeries(tuple(obs), label=label)


def simulate_ar1(m, alpha, k2, delta, n, seed, r0=None):
    """Exact OU discretization for synthetic estimator-recovery data."""
    rng = np.random.default_rng(seed)
    a = np.exp(-alpha * delta)
    sd = np.sqrt(k2 * (1.0 - a * a) / (2.0 * alpha))
    r = np.empty(n)
    r[0] = m if r0 is None else r0
    shocks = rng.standard_normal(n - 1)
    for i in range(n - 1):
        r[i + 1] = m + (r[i] - m) * a + sd * shocks[i]
    return r
