import numpy as np
import pytest

from fringekit import HeightMap, Mask, ScalarImage


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def heightmap(values, valid=None) -> HeightMap:
    """Build a HeightMap from nested lists / arrays (all-valid by default)."""
    arr = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(arr)
    return HeightMap(ScalarImage(arr), Mask(np.asarray(valid, dtype=bool)))
