"""
Voronoi 量化测试：格量化、非均匀站点、网格范数、径向矩不等式、项数预算
"""
import math

import numpy as np
import pytest

from wquant.core.lattice import Lattice, decode_batch
from wquant.core.measures import DiscreteMeasure, uniform_cube
from wquant.core.models import ApproximantMode
from wquant.core.ot_exact import wasserstein_1d
from wquant.core.quantize import (Approximant, LatticeScheme, SiteScheme, choose_h_for_budget, coupling_cost,
                                  dirac_realization, mesh_norm, moment_bound_suite, nearest_sites,
                                  quantize_lattice, quantize_nonuniform, realize, separation_radius, term_count)
from wquant.errors import BudgetInfeasibleError, InvalidInputError
from wquant.harness.specs import jittered_grid


def closed_form_1d(h, p):
    """[−½,½] 上均匀分布在对齐的 hZ 上的 W_p"""
    return h / (2.0 * (p + 1.0) ** (1.0 / p))


# ==========================================
# 格量化
# ==========================================

def test_uniform_1d_cells(uniform_1d):
    approx = quantize_lattice(uniform_1d, Lattice.integer(1), 0.5)
    np.testing.assert_array_equal(approx.cells[:, 0], [-1, 0, 1])
    np.testing.assert_allclose(approx.masses, [0.25, 0.5, 0.25], atol=1e-12)
    np.testing.assert_allclose(approx.sites[:, 0], [-0.5, 0.0, 0.5])


@pytest.mark.parametrize("p", [1.0, 2.0])
@pytest.mark.parametrize("h", [0.5, 0.25, 0.125])
def test_uniform_1d_closed_form(uniform_1d, h, p):
    approx = quantize_lattice(uniform_1d, Lattice.integer(1), h)
    expected = closed_form_1d(h, p)
    assert coupling_cost(uniform_1d, approx, p) == pytest.approx(expected, abs=1e-9)
    measured = wasserstein_1d(approx.surrogate.as_measure(), dirac_realization(approx), p)
    assert measured == pytest.approx(expected, abs=1e-9)


def test_point_mass_is_its_own_approximant(origin_2d, z2):
    approx = quantize_lattice(origin_2d, z2, 0.5)
    assert approx.n_cells == 1
    np.testing.assert_array_equal(approx.sites, [[0.0, 0.0]])
    assert coupling_cost(origin_2d, approx, 2.0) == 0.0


def test_atoms_move_to_their_cell_sites():
    mu = DiscreteMeasure([[0.3], [0.7]])
    approx = quantize_lattice(mu, Lattice.integer(1), 1.0)
    np.testing.assert_allclose(approx.sites[:, 0], [0.0, 1.0])
    assert coupling_cost(mu, approx, 1.0) == pytest.approx(0.3)


@pytest.mark.parametrize("mode", [ApproximantMode.DIRAC, ApproximantMode.INDICATOR])
def test_hexagonal_gaussian_within_cell_bound(gaussian_2d, a2, mode):
    h = 0.25
    approx = quantize_lattice(gaussian_2d, a2, h, mode)
    np.testing.assert_array_equal(decode_batch(a2, h, approx.sites), approx.cells)
    assert approx.masses.sum() == pytest.approx(1.0, abs=1e-10)
    assert coupling_cost(gaussian_2d, approx, 2.0) <= a2.geometry.diameter * h + 1e-9


def test_indicator_realization_is_probability(uniform_2d, z2):
    approx = quantize_lattice(uniform_2d, z2, 0.5, ApproximantMode.INDICATOR)
    realized = realize(approx)
    assert realized.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert realized.n_atoms > approx.n_cells


def test_lattice_scheme_requires_h_at_most_one(uniform_1d):
    with pytest.raises(InvalidInputError):
        quantize_lattice(uniform_1d, Lattice.integer(1), 1.5)
    with pytest.raises(InvalidInputError):
        LatticeScheme(Lattice.integer(1), 0.0)


def test_refine_must_be_positive(uniform_1d):
    with pytest.raises(InvalidInputError):
        quantize_lattice(uniform_1d, Lattice.integer(1), 0.5, refine=0)


def test_dimension_mismatch(uniform_1d, z2):
    with pytest.raises(InvalidInputError):
        quantize_lattice(uniform_1d, z2, 0.5)


def test_dirac_realization_is_a_fixed_point(gaussian_2d, z2):
    first = dirac_realization(quantize_lattice(gaussian_2d, z2, 0.25))
    second = dirac_realization(quantize_lattice(first, z2, 0.25))
    assert second.same_atoms(first)


def test_term_count(uniform_2d, z2):
    approx = quantize_lattice(uniform_2d, z2, 0.5)
    assert term_count(approx) == approx.n_cells == 9
    assert term_count(approx, R=0.1) == 1
    assert term_count(approx, R=1.0) == 9


def test_approximant_dict_round_trip(uniform_2d, a2):
    approx = quantize_lattice(uniform_2d, a2, 0.5)
    restored = Approximant.from_dict(approx.to_dict())
    assert restored.same_cells(approx)
    assert restored.scheme.matches(approx.scheme)


# ==========================================
# 非均匀站点
# ==========================================

def test_two_sites_on_the_unit_interval(uniform_1d):
    approx = quantize_nonuniform(uniform_1d, [[-0.25], [0.25]])
    np.testing.assert_allclose(approx.masses, [0.5, 0.5], atol=1e-12)
    assert coupling_cost(uniform_1d, approx, 1.0) == pytest.approx(0.125, abs=1e-3)


def test_nearest_site_ties_take_smallest_index():
    sites = np.array([[1.0], [0.0]])
    assert nearest_sites(sites, [[0.5]])[0] == 0
    sites = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(nearest_sites(sites, [[0.5, 0.5], [0.9, 0.1]]), [0, 1])


def test_duplicate_sites_rejected(uniform_1d):
    with pytest.raises(InvalidInputError):
        SiteScheme(np.array([[0.0], [0.0]]))
    with pytest.raises(InvalidInputError):
        quantize_nonuniform(uniform_1d, [[0.1], [0.1], [0.2]])


def test_nonuniform_indicator_cells_clip_to_support(uniform_2d):
    sites = jittered_grid(16, (np.full(2, -0.5), np.full(2, 0.5)), 0.25, seed=2)
    approx = quantize_nonuniform(uniform_2d, sites, ApproximantMode.INDICATOR)
    assert approx.scheme.domain is not None
    assert coupling_cost(uniform_2d, approx, 2.0) <= 2.0 * mesh_norm(sites, (np.zeros(2), math.sqrt(0.5))) + 1e-9


# ==========================================
# 网格范数与分离半径
# ==========================================

def test_mesh_norm_of_single_site():
    value = mesh_norm([[0.0, 0.0]], ((0.0, 0.0), 1.0))
    assert 1.0 <= value <= 1.05


def test_mesh_norm_decreases_with_more_sites():
    box = (np.full(2, -0.5), np.full(2, 0.5))
    coarse = mesh_norm(jittered_grid(16, box, 0.0), (np.zeros(2), 0.5))
    fine = mesh_norm(jittered_grid(64, box, 0.0), (np.zeros(2), 0.5))
    assert fine < coarse


def test_separation_radius():
    assert separation_radius([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        separation_radius([[0.0, 0.0]])


# ==========================================
# 径向矩不等式
# ==========================================

def test_moment_bounds_for_point_mass(origin_2d, z2):
    reports = moment_bound_suite(origin_2d, LatticeScheme(z2, 0.5), 2.0)
    assert [r.inequality_id for r in reports] == ["L3.2.i", "L3.2.ii", "L3.2.iii"]
    assert all(r.passed for r in reports)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_moment_bounds_for_lattice(gaussian_2d, a2, p):
    assert all(r.passed for r in moment_bound_suite(gaussian_2d, LatticeScheme(a2, 0.25), p))


def test_chained_coefficient_in_third_moment_bound():
    eta = 1e-3
    reports = moment_bound_suite(DiscreteMeasure.dirac([0.5 + eta]), LatticeScheme(Lattice.integer(1), 1.0), 2.0)
    third = reports[2]
    assert third.inequality_id == "L3.2.iii"
    assert third.lhs == pytest.approx(1.5 ** 2)
    m_p, spread = (0.5 + eta) ** 2, 0.5 ** 2
    assert third.rhs == pytest.approx((4.0 + 2.0) * spread + 4.0 * m_p)
    assert third.passed
    # 2^{p−1} 作为 M_p 系数时不成立
    assert third.lhs > (4.0 + 2.0) * spread + 2.0 * m_p


def test_moment_bounds_for_sites(uniform_2d):
    sites = jittered_grid(16, (np.full(2, -0.5), np.full(2, 0.5)), 0.25, seed=5)
    reports = moment_bound_suite(uniform_2d, SiteScheme(sites), 2.0)
    assert [r.inequality_id for r in reports] == ["L5.1.i", "L5.1.ii", "L5.1.iii"]
    assert all(r.passed for r in reports)


# ==========================================
# 项数预算
# ==========================================

def test_choose_h_for_budget(z2):
    assert choose_h_for_budget(z2, 1.0, 81) == pytest.approx(1.0)
    assert choose_h_for_budget(z2, 1.0, 324) == pytest.approx(0.5)


def test_budget_too_small(z2):
    with pytest.raises(BudgetInfeasibleError) as info:
        choose_h_for_budget(z2, 1.0, 80)
    assert info.value.minimum_n == 81


def test_budget_terms_stay_within_covering(z2):
    h = choose_h_for_budget(z2, 1.0, 1000)
    approx = quantize_lattice(uniform_cube(2, side=1.4), z2, h)
    assert term_count(approx, R=1.0) <= 1000
