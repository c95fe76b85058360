"""
测度核心测试：离散测度的规范化、密度求积、采样与推前
"""
import math

import numpy as np
import pytest

from wquant.core.measures import (Atom, DiscreteMeasure, Mixture, circle_arc, discretize, moment, pushforward,
                                  sample, support_radius, total_mass, truncated_gaussian, uniform_cube)
from wquant.errors import InvalidInputError


# ==========================================
# 离散测度
# ==========================================

def test_duplicate_atoms_are_merged_and_normalized():
    mu = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]], [1.0, 1.0, 2.0])
    assert mu.n_atoms == 2
    np.testing.assert_allclose(mu.locations, [[0.0, 0.0], [1.0, 0.0]])
    np.testing.assert_allclose(mu.weights, [0.75, 0.25])


def test_atoms_sorted_lexicographically():
    mu = DiscreteMeasure([[1.0, 0.0], [0.0, 2.0], [0.0, 1.0]])
    np.testing.assert_array_equal(mu.locations, [[0.0, 1.0], [0.0, 2.0], [1.0, 0.0]])


def test_tiny_atoms_are_dropped():
    mu = DiscreteMeasure([[0.0], [1.0]], [1.0, 1e-18])
    assert mu.n_atoms == 1
    assert mu.weights[0] == 1.0


def test_flat_array_means_one_dimensional_points():
    mu = DiscreteMeasure([0.0, 0.5, 1.0])
    assert mu.dim == 1
    assert mu.n_atoms == 3


@pytest.mark.parametrize("locations, weights", [
    ([], None),
    ([[0.0], [1.0]], [1.0, -1.0]),
    ([[0.0], [1.0]], [0.0, 0.0]),
    ([[0.0], [math.nan]], None),
    ([[0.0], [1.0]], [1.0]),
])
def test_invalid_discrete_measures(locations, weights):
    with pytest.raises(InvalidInputError):
        DiscreteMeasure(locations, weights, dim=1)


def test_atom_validation():
    with pytest.raises(InvalidInputError):
        Atom((0.0, math.inf), 0.5)
    with pytest.raises(InvalidInputError):
        Atom((0.0,), -0.1)


def test_from_atoms_and_same_atoms():
    mu = DiscreteMeasure.from_atoms([Atom((1.0, 1.0), 0.25), Atom((0.0, 0.0), 0.75)])
    nu = DiscreteMeasure([[0.0, 0.0], [1.0, 1.0]], [3.0, 1.0])
    assert mu.same_atoms(nu)
    assert not mu.same_atoms(DiscreteMeasure.dirac([0.0, 0.0]))


# ==========================================
# 密度测度
# ==========================================

def test_uniform_cube_mass_and_second_moment(uniform_1d):
    assert total_mass(uniform_1d) == pytest.approx(1.0, abs=1e-12)
    assert moment(uniform_1d, 2) == pytest.approx(1.0 / 12.0, abs=1e-12)


def test_gaussian_mass(gaussian_2d):
    assert total_mass(gaussian_2d) == pytest.approx(1.0, abs=1e-8)


def test_uniform_cube_support_radius(uniform_2d):
    assert support_radius(uniform_2d) == pytest.approx(math.sqrt(2) / 2)


def test_density_is_zero_outside_box(uniform_2d):
    values = uniform_2d.evaluate([[0.0, 0.0], [0.6, 0.0]])
    np.testing.assert_allclose(values, [1.0, 0.0])


def test_degenerate_support_box_rejected():
    with pytest.raises(InvalidInputError):
        uniform_cube(2, side=0.0)


def test_gaussian_rejects_nonpositive_sigma():
    with pytest.raises(InvalidInputError):
        truncated_gaussian(2, sigma=0.0)


# ==========================================
# 采样
# ==========================================

def test_sampling_is_deterministic_and_inside_support(uniform_2d):
    a = sample(uniform_2d, 500, seed=3)
    b = sample(uniform_2d, 500, seed=3)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (500, 2)
    assert np.all(np.abs(a) <= 0.5)


def test_sampling_discrete_only_hits_atoms():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    points = sample(mu, 200, seed=1)
    assert set(points[:, 0].tolist()) <= {0.0, 1.0}


def test_sample_rejects_nonpositive_count(uniform_1d):
    with pytest.raises(InvalidInputError):
        sample(uniform_1d, 0)


# ==========================================
# 混合、离散化与推前
# ==========================================

def test_mixture_validation(uniform_1d, uniform_2d):
    with pytest.raises(InvalidInputError):
        Mixture([(0.5, uniform_1d), (0.4, uniform_1d)])
    with pytest.raises(InvalidInputError):
        Mixture([(0.5, uniform_1d), (0.5, uniform_2d)])
    mix = Mixture([(0.25, uniform_2d), (0.75, DiscreteMeasure.dirac([0.0, 0.0]))])
    assert mix.dim == 2
    assert total_mass(mix) == pytest.approx(1.0, abs=1e-12)


def test_discretize_keeps_discrete_measures():
    mu = DiscreteMeasure([[0.0], [1.0]], [0.3, 0.7])
    assert discretize(mu) is mu


def test_discretize_density_is_probability(uniform_2d):
    surrogate = discretize(uniform_2d)
    assert isinstance(surrogate, DiscreteMeasure)
    assert surrogate.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.abs(surrogate.locations) <= 0.5)


def test_pushforward_of_discrete_measure():
    mu = DiscreteMeasure([[0.5], [1.0]], [0.5, 0.5])
    doubled = pushforward(mu, lambda x: 2.0 * x)
    np.testing.assert_allclose(doubled.locations[:, 0], [1.0, 2.0])
    np.testing.assert_allclose(doubled.weights, [0.5, 0.5])


def test_pushforward_merges_collapsed_atoms():
    mu = DiscreteMeasure([[-1.0], [1.0]])
    folded = pushforward(mu, np.abs)
    assert folded.n_atoms == 1


def test_circle_arc_atoms_lie_on_circle():
    arc = circle_arc(radius=0.4, n_atoms=64)
    np.testing.assert_allclose(np.linalg.norm(arc.locations, axis=1), 0.4)
    assert arc.n_atoms == 64
