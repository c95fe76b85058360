"""
格测试：最近格点解码、Voronoi 几何、覆盖计数
"""
import itertools
import math

import numpy as np
import pytest

from wquant.core.lattice import (Lattice, LatticeKind, cell_volume, cells_intersecting_box, covering_count, decode,
                                 decode_batch)
from wquant.errors import InvalidInputError, UnsupportedDimensionError


def _brute_force_nearest(lattice, h, points, reach=8):
    """在 |k_i| ≤ reach 的系数窗口里找最近格点距离"""
    coords = np.array(list(itertools.product(range(-reach, reach + 1), repeat=lattice.dim)), dtype=float)
    sites = h * coords @ lattice.basis.T
    dist = np.linalg.norm(points[:, None, :] - sites[None, :, :], axis=2)
    return dist.min(axis=1)


# ==========================================
# 解码
# ==========================================

@pytest.mark.parametrize("x, expected", [(0.5, 0), (-0.5, -1), (0.49, 0), (1.5, 1), (-1.51, -2)])
def test_integer_decoding_breaks_ties_downward(x, expected):
    assert decode(Lattice.integer(1), 1.0, [x]) == (expected,)


def test_integer_decoding_scales_with_h():
    assert decode(Lattice.integer(2), 0.25, [0.3, -0.3]) == (1, -1)


@pytest.mark.parametrize("lattice", [Lattice.hexagonal(), Lattice.checkerboard(3), Lattice.checkerboard(2)],
                         ids=repr)
def test_decoding_matches_brute_force(lattice, rng):
    h = 0.5
    points = rng.uniform(-1.0, 1.0, size=(200, lattice.dim))
    cells = decode_batch(lattice, h, points)
    decoded = np.linalg.norm(points - lattice.sites(cells, h), axis=1)
    best = _brute_force_nearest(lattice, h, points)
    np.testing.assert_allclose(decoded, best, atol=1e-12)


def test_decoding_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        decode_batch(Lattice.integer(2), 0.0, [[0.0, 0.0]])
    with pytest.raises(InvalidInputError):
        decode_batch(Lattice.integer(2), 1.0, [[math.nan, 0.0]])


# ==========================================
# 几何
# ==========================================

def test_integer_geometry():
    geometry = Lattice.integer(3).geometry
    assert geometry.diameter == pytest.approx(math.sqrt(3))
    assert geometry.covering_radius == pytest.approx(math.sqrt(3) / 2)


def test_hexagonal_geometry(a2):
    assert a2.geometry.diameter == pytest.approx(2 / math.sqrt(3))
    assert a2.geometry.covering_radius == pytest.approx(1 / math.sqrt(3))
    assert cell_volume(a2, 1.0) == pytest.approx(math.sqrt(3) / 2)


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
def test_checkerboard_covering_radius(dim):
    geometry = Lattice.checkerboard(dim).geometry
    assert geometry.covering_radius == pytest.approx(max(1.0, math.sqrt(dim) / 2))


@pytest.mark.parametrize("lattice", [Lattice.integer(2), Lattice.hexagonal(), Lattice.checkerboard(3)], ids=repr)
def test_diameter_is_twice_covering_radius(lattice):
    assert lattice.geometry.diameter == pytest.approx(2 * lattice.geometry.covering_radius)


def test_general_rectangle_geometry():
    lattice = Lattice(np.diag([1.0, 2.0]))
    assert lattice.kind == LatticeKind.GENERAL
    assert lattice.geometry.diameter == pytest.approx(math.sqrt(5))
    assert lattice.geometry.covering_radius == pytest.approx(math.sqrt(5) / 2)


def test_general_basis_is_reduced():
    # 列 (1,0), (1,1) 生成的是 Z²
    lattice = Lattice([[1.0, 1.0], [0.0, 1.0]])
    assert lattice.geometry.diameter == pytest.approx(math.sqrt(2))
    assert lattice.determinant == pytest.approx(1.0)


def test_general_geometry_dimension_limit():
    lattice = Lattice(2.0 * np.eye(5))
    with pytest.raises(UnsupportedDimensionError):
        _ = lattice.geometry


def test_cell_volume_scaling(z2):
    assert cell_volume(z2, 0.5) == pytest.approx(0.25)
    assert cell_volume(Lattice.integer(3), 0.5) == pytest.approx(0.125)


# ==========================================
# 构造与序列化
# ==========================================

def test_singular_basis_rejected():
    with pytest.raises(InvalidInputError):
        Lattice([[1.0, 2.0], [2.0, 4.0]])


def test_canonical_kind_requires_canonical_basis():
    with pytest.raises(InvalidInputError):
        Lattice(2.0 * np.eye(2), LatticeKind.INTEGER)


def test_dict_round_trip_and_equality(a2):
    assert Lattice.from_dict(a2.to_dict()) == a2
    assert a2.to_dict()["kind"] == "A2"
    assert repr(a2) == "Lattice(kind=hexagonal_A2, dim=2)"
    assert len({a2, Lattice.hexagonal(), Lattice.integer(2)}) == 2


@pytest.mark.parametrize("spec", [
    {"kind": "E8", "dim": 8},
    {"kind": "general", "dim": 2},
    {"kind": "general", "dim": 3, "basis": [[1.0, 0.0], [0.0, 1.0]]},
    {"kind": "A2", "dim": 3},
])
def test_from_dict_errors(spec):
    with pytest.raises(InvalidInputError):
        Lattice.from_dict(spec)


# ==========================================
# 覆盖计数
# ==========================================

def test_covering_count_unit_disc(z2):
    assert covering_count(z2, 1.0, 1.0) == 9


@pytest.mark.parametrize("lattice", [Lattice.integer(2), Lattice.hexagonal()], ids=repr)
@pytest.mark.parametrize("h, R", [(0.5, 1.0), (0.25, 2.0)])
def test_covering_count_matches_enumeration(lattice, h, R):
    radius = R + h * lattice.geometry.covering_radius
    reach = int(math.ceil(2 * radius / h)) + 2
    coords = np.array(list(itertools.product(range(-reach, reach + 1), repeat=2)), dtype=float)
    norms = np.linalg.norm(h * coords @ lattice.basis.T, axis=1)
    assert covering_count(lattice, h, R) == int(np.count_nonzero(norms <= radius + 1e-9))


def test_covering_count_grows_like_h_to_minus_d(z2):
    coarse = covering_count(z2, 0.1, 1.0)
    fine = covering_count(z2, 0.05, 1.0)
    assert 3.0 < fine / coarse < 5.0


def test_covering_count_rejects_nonpositive(z2):
    with pytest.raises(InvalidInputError):
        covering_count(z2, 0.5, 0.0)


@pytest.mark.parametrize("lattice", [Lattice.integer(2), Lattice.hexagonal()], ids=repr)
def test_cells_intersecting_box_cover_the_box(lattice, rng):
    h = 0.3
    box = (np.array([-0.5, -0.2]), np.array([0.7, 0.4]))
    listed = cells_intersecting_box(lattice, h, box)
    cells = set(listed)
    points = rng.uniform(box[0], box[1], size=(2000, 2))
    decoded = {tuple(int(c) for c in row) for row in decode_batch(lattice, h, points)}
    assert decoded <= cells
    assert listed == sorted(listed)
