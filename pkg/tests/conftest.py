from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from tailgini.sample_core import PairedSample


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def pareto_pair(rng):
    """Independent Pareto(0.5) X and standard normal Y."""
    n = 2000
    return PairedSample(rng.random(n) ** -0.5, rng.standard_normal(n))


@pytest.fixture
def random_walk_prices():
    """Business-day closes following a geometric random walk."""
    def walk(rng: np.random.Generator, start: str, weeks: int, drift: float = 0.0, vol: float = 0.01):
        dates = pd.bdate_range(start, periods=weeks * 5)
        steps = rng.normal(drift, vol, dates.size)
        return dates, 100.0 * np.exp(np.cumsum(steps))
    return walk


@pytest.fixture
def write_prices(tmp_path: Path):
    def write(name: str, dates, closes) -> Path:
        path = tmp_path / f"{name}.csv"
        pd.DataFrame({"date": pd.DatetimeIndex(dates).strftime("%Y-%m-%d"), "close": closes}).to_csv(path, index=False)
        return path
    return write
