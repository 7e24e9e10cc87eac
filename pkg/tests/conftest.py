import datetime as dt

import numpy as np
import pytest

from crisiscast.series import WeeklySeries
from crisiscast.synthetic import SyntheticParams, generate_synthetic

MONDAY = dt.date(2015, 1, 5)


def make_series(values, name="y", start=MONDAY, transform="level") -> WeeklySeries:
    return WeeklySeries(name, start, np.asarray(values, dtype=float), transform)


@pytest.fixture(scope="session")
def six_years():
    """Default 6-year synthetic dataset, shared across test modules."""
    return generate_synthetic(6, 0, SyntheticParams())
