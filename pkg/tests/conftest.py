import numpy as np
import pytest

from uotkit import DiscreteMeasure


def random_measure(rng, n, mass=None, lo=0.0, hi=1.0, min_w=0.1):
    """Sorted measure with positive weights, optionally rescaled to a mass."""
    w = rng.uniform(min_w, 1.0, n)
    if mass is not None:
        w *= mass / w.sum()
    return DiscreteMeasure(np.sort(rng.uniform(lo, hi, n)), w)


def balanced_pair(rng, n, m, lo=0.0, hi=1.0):
    a = random_measure(rng, n, lo=lo, hi=hi)
    b = random_measure(rng, m, mass=a.mass, lo=lo, hi=hi)
    return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
