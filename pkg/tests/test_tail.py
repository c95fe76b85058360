"""
尾部截断测试：球投影、截断误差、三个衰减条件
"""
import math

import numpy as np
import pytest
from scipy.special import zeta

from wquant.core.measures import Atom, DiscreteMeasure, Mixture, truncated_gaussian, uniform_cube
from wquant.core.models import ShellMassSpec, TailDecaySpec
from wquant.core.ot_exact import wasserstein_lp
from wquant.core.tail import DensityEvaluator, check_decay_conditions, decay_inputs, project_to_ball, truncation_error
from wquant.errors import InvalidInputError


def saturated_atoms(epsilon, p, q, R, count=5):
    """恰好达到条件 (3) 阈值的原子尾部，其余质量放在原点"""
    z = float(zeta(q))
    atoms = [Atom((R + k, 0.0), epsilon ** p / (3.0 * z) * k ** (-q) * float(k) ** (-p))
             for k in range(1, count + 1)]
    atoms.append(Atom((0.0, 0.0), 1.0 - math.fsum(a.weight for a in atoms)))
    return atoms


# ==========================================
# 投影与截断误差
# ==========================================

def test_project_single_atom():
    projected = project_to_ball(DiscreteMeasure.dirac([3.0, 0.0]), 1.0)
    np.testing.assert_allclose(projected.locations, [[1.0, 0.0]])


def test_projection_keeps_inner_atoms():
    mu = DiscreteMeasure([[0.2, 0.1], [0.0, -4.0]], [0.5, 0.5])
    projected = project_to_ball(mu, 2.0)
    np.testing.assert_allclose(projected.locations, [[0.0, -2.0], [0.2, 0.1]])


def test_projection_of_compact_density_is_identity(gaussian_2d):
    assert project_to_ball(gaussian_2d, 10.0) is gaussian_2d


def test_projection_of_density_is_supported_in_ball():
    gaussian = truncated_gaussian(2, sigma=0.5, truncation=4.0)
    projected = project_to_ball(gaussian, 0.5, seed=1)
    assert isinstance(projected, DiscreteMeasure)
    assert np.max(np.linalg.norm(projected.locations, axis=1)) <= 0.5 + 1e-12


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_single_atom_truncation_error(p):
    single = DiscreteMeasure.dirac([3.0, 0.0])
    assert truncation_error(single, 1.0, p) == pytest.approx(2.0, abs=1e-12)
    moved, _ = wasserstein_lp(single, project_to_ball(single, 1.0), p)
    assert moved == pytest.approx(2.0, abs=1e-9)


def test_two_atom_truncation_error():
    pair = DiscreteMeasure([[3.0, 0.0], [0.0, 0.5]], [0.5, 0.5])
    assert truncation_error(pair, 1.0, 2.0) == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_truncation_error_bounds_projection_distance():
    mu = DiscreteMeasure([[0.0, 0.0], [2.0, 1.0], [-3.0, 0.5]], [0.6, 0.3, 0.1])
    moved, _ = wasserstein_lp(mu, project_to_ball(mu, 1.0), 2.0)
    assert moved <= truncation_error(mu, 1.0, 2.0) + 1e-9


def test_truncation_error_is_zero_inside_ball(uniform_2d):
    assert truncation_error(uniform_2d, 1.0, 2.0) == 0.0


def test_truncation_error_of_mixture(uniform_2d):
    mix = Mixture([(0.5, uniform_2d), (0.5, DiscreteMeasure.dirac([3.0, 0.0]))])
    assert truncation_error(mix, 1.0, 2.0) == pytest.approx(math.sqrt(0.5 * 4.0), abs=1e-12)


def test_truncation_error_decreases_with_radius(gaussian_2d):
    errors = [truncation_error(gaussian_2d, r, 2.0) for r in np.linspace(0.1, 1.5, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_truncation_error_validation(uniform_2d):
    with pytest.raises(InvalidInputError):
        truncation_error(uniform_2d, 0.0, 2.0)
    with pytest.raises(InvalidInputError):
        project_to_ball(uniform_2d, -1.0)


# ==========================================
# 衰减条件
# ==========================================

def test_decay_spec_requires_q_above_one():
    with pytest.raises(InvalidInputError):
        TailDecaySpec(0.1, 2.0, 1.0, 1.0)


def test_saturated_atom_tail_passes():
    epsilon, p, q, R = 0.5, 2.0, 2.0, 1.0
    report = check_decay_conditions(None, None, saturated_atoms(epsilon, p, q, R), TailDecaySpec(epsilon, p, R, q))
    assert report.conditions_pass == (True, True, True)
    assert report.total_bound <= epsilon + 1e-9
    assert report.margins["atoms"]["n_outside"] == 5


def test_heavier_atom_is_reported():
    epsilon, p, q, R = 0.5, 2.0, 2.0, 1.0
    atoms = saturated_atoms(epsilon, p, q, R)
    atoms[0] = Atom(atoms[0].location, 2.0 * atoms[0].weight)
    report = check_decay_conditions(None, None, atoms, TailDecaySpec(epsilon, p, R, q))
    assert report.conditions_pass[2] is False
    assert report.margins["atoms"]["offending_atoms"] == [1]


def test_shell_condition():
    spec = TailDecaySpec(0.5, 2.0, 1.0, 2.0)
    light = check_decay_conditions(None, ShellMassSpec({1: 0.01, 2: 0.001}), None, spec)
    assert light.conditions_pass[1]
    assert light.bound_sc == pytest.approx(0.01 * 1.0 + 0.001 * 4.0)
    heavy = check_decay_conditions(None, ShellMassSpec({1: 0.1}), None, spec)
    assert not heavy.conditions_pass[1]
    assert heavy.margins["shells"]["offending_shells"] == [1]


def test_shells_with_fractional_radius_are_not_guaranteed():
    report = check_decay_conditions(None, ShellMassSpec({1: 0.001}), None, TailDecaySpec(0.5, 2.0, 1.5, 2.0))
    assert report.implication_guaranteed is False


def test_small_radius_density_is_not_guaranteed(gaussian_2d):
    probe, atoms = decay_inputs(gaussian_2d, 0.3)
    assert atoms == []
    report = check_decay_conditions(probe, None, atoms, TailDecaySpec(0.1, 2.0, 0.3, 2.0))
    assert report.implication_guaranteed is False


def test_light_gaussian_tail_passes_density_condition():
    gaussian = truncated_gaussian(2, sigma=0.1, truncation=8.0)
    probe, _ = decay_inputs(gaussian, 1.0)
    report = check_decay_conditions(probe, None, None, TailDecaySpec(0.1, 2.0, 1.0, 2.0))
    assert report.conditions_pass[0]
    assert report.implication_guaranteed
    assert report.bound_ac == pytest.approx(0.1 ** 2 / (3.0 * 3.0))


def test_decay_inputs_split_mixture(uniform_2d):
    mix = Mixture([(0.5, uniform_2d), (0.5, DiscreteMeasure([[0.0, 0.0], [2.0, 0.0]]))])
    probe, atoms = decay_inputs(mix, 1.0)
    assert probe is not None
    assert len(atoms) == 1
    assert atoms[0].weight == pytest.approx(0.25)
    np.testing.assert_allclose(probe(np.array([[0.0, 0.0]])), [0.5])


def test_atom_dimension_must_match_spec():
    with pytest.raises(InvalidInputError):
        check_decay_conditions(None, None, [Atom((5.0,), 0.1)], TailDecaySpec(0.5, 2.0, 1.0, 2.0, dim=2))


def far_density_mixture():
    """一半质量在原点附近，一半在 x ≈ 5 处的均匀方块"""
    return Mixture([(0.5, uniform_cube(2)), (0.5, uniform_cube(2, center=(5.0, 0.0)))])


def test_density_part_carries_support_radius():
    probe, atoms = decay_inputs(far_density_mixture(), 1.0)
    assert isinstance(probe, DensityEvaluator)
    assert atoms == []
    assert probe.support_radius == pytest.approx(math.hypot(5.5, 0.5))
    np.testing.assert_allclose(probe(np.array([[5.0, 0.0], [3.0, 0.0]])), [0.5, 0.0])


def test_far_density_mass_fails_condition_one():
    mix = far_density_mixture()
    spec = TailDecaySpec(0.1, 2.0, 1.0, 2.0)
    probe, atoms = decay_inputs(mix, 1.0)
    report = check_decay_conditions(probe, None, atoms, spec)
    assert report.conditions_pass[0] is False
    assert report.margins["density"]["r_max"] == pytest.approx(probe.support_radius)
    assert report.margins["density"]["worst_radius"] > 4.0
    trunc = truncation_error(mix, 1.0, 2.0)
    assert trunc > 20 * spec.epsilon
    assert report.bound_ac > 1.0
    assert report.total_bound > spec.epsilon


def test_short_r_max_is_extended_to_support():
    probe, _ = decay_inputs(far_density_mixture(), 1.0)
    report = check_decay_conditions(probe, None, None, TailDecaySpec(0.1, 2.0, 1.0, 2.0), r_max=2.0)
    assert report.conditions_pass[0] is False
    assert report.margins["density"]["r_max"] == pytest.approx(probe.support_radius)


def test_plain_density_callable_needs_r_max():
    spec = TailDecaySpec(0.1, 2.0, 1.0, 2.0)
    with pytest.raises(InvalidInputError):
        check_decay_conditions(lambda x: np.zeros(len(x)), None, None, spec)
    report = check_decay_conditions(lambda x: np.zeros(len(x)), None, None, spec, r_max=3.0)
    assert report.conditions_pass[0]
    assert report.margins["density"]["r_max"] == 3.0


def test_density_inside_ball_has_no_tail(uniform_2d):
    probe, _ = decay_inputs(uniform_2d, 1.0)
    report = check_decay_conditions(probe, None, None, TailDecaySpec(0.1, 2.0, 1.0, 2.0))
    assert report.conditions_pass[0]
    assert report.bound_ac == 0.0
