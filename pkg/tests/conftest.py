import numpy as np
import pytest

from iedd import geometry, kernel


@pytest.fixture(scope="session")
def dense_cache():
    """Memoized dense operators keyed by (dim, n, lattice)."""
    cache = {}

    def get(dim, n, lattice=None):
        key = (dim, n, lattice)
        if key not in cache:
            op = kernel.build_operator(geometry.build_grid(dim, n), lattice=lattice)
            cache[key] = (op, op.dense())
        return cache[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
