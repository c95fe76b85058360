"""
共享测试夹具
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from wquant.core.lattice import Lattice  # noqa: E402
from wquant.core.measures import DiscreteMeasure, truncated_gaussian, uniform_cube  # noqa: E402


@pytest.fixture
def uniform_1d():
    return uniform_cube(1)


@pytest.fixture
def uniform_2d():
    return uniform_cube(2)


@pytest.fixture
def gaussian_2d():
    return truncated_gaussian(2, sigma=1.0 / 6.0)


@pytest.fixture
def origin_2d():
    return DiscreteMeasure.dirac([0.0, 0.0])


@pytest.fixture
def z2():
    return Lattice.integer(2)


@pytest.fixture
def a2():
    return Lattice.hexagonal()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
