import datetime as dt
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from enspost.core import (
    Dataset,
    EnsembleForecast,
    MarginIndex,
    Observation,
    TEMPERATURE,
    WIND_SPEED,
)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def two_margin_catalog():
    return (
        MarginIndex(WIND_SPEED, "vienna", 24),
        MarginIndex(TEMPERATURE, "vienna", 24),
    )


def make_dataset(n_days=60, n_members=5, catalog=None, seed=7, start=dt.date(2021, 1, 1)):
    """Small wind+temperature dataset with mild correlation, for unit tests."""
    if catalog is None:
        catalog = (
            MarginIndex(TEMPERATURE, "vienna", 24),
            MarginIndex(WIND_SPEED, "vienna", 24),
        )
    gen = np.random.default_rng(seed)
    wind_cols = [j for j, m in enumerate(catalog) if m.variable == WIND_SPEED]
    instances = []
    date = start
    for _ in range(n_days):
        center = gen.normal(8.0, 2.0, size=len(catalog))
        members = center + gen.normal(0, 1.0, size=(n_members, len(catalog)))
        obs = center + gen.normal(0, 1.0, size=len(catalog))
        members[:, wind_cols] = np.abs(members[:, wind_cols])
        obs[wind_cols] = np.abs(obs[wind_cols])
        instances.append(
            (
                EnsembleForecast(date, members, catalog),
                Observation(date, obs, catalog),
            )
        )
        date += dt.timedelta(days=1)
    return Dataset(tuple(instances), catalog)
