"""
精确最优运输测试：网络单纯形、一维分位数、穷举与度量公理
"""
import numpy as np
import pytest

from wquant import config
from wquant.core.measures import DiscreteMeasure
from wquant.core.ot_exact import (metric_check, wasserstein, wasserstein_1d, wasserstein_bruteforce,
                                  wasserstein_lp)
from wquant.errors import InvalidInputError, ResourceLimitError


def random_measure(rng, n, dim, uniform=True):
    locations = rng.uniform(-1.0, 1.0, size=(n, dim))
    weights = None if uniform else rng.uniform(0.1, 1.0, size=n)
    return DiscreteMeasure(locations, weights, dim=dim)


def test_distance_between_point_masses():
    mu, nu = DiscreteMeasure.dirac([0.0, 0.0]), DiscreteMeasure.dirac([1.0, 0.0])
    for p in (1.0, 2.0, 3.5):
        assert wasserstein_lp(mu, nu, p)[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0])
def test_lp_matches_permutations(rng, p):
    for _ in range(10):
        n = int(rng.integers(2, 6))
        mu, nu = random_measure(rng, n, 2), random_measure(rng, n, 2)
        assert wasserstein_lp(mu, nu, p)[0] == pytest.approx(wasserstein_bruteforce(mu, nu, p), abs=1e-12)


def test_lp_matches_vertex_enumeration(rng):
    for _ in range(10):
        mu = random_measure(rng, int(rng.integers(1, 5)), 2, uniform=False)
        nu = random_measure(rng, int(rng.integers(1, 5)), 2, uniform=False)
        assert wasserstein_lp(mu, nu, 2.0)[0] == pytest.approx(wasserstein_bruteforce(mu, nu, 2.0), abs=1e-12)


def test_lp_matches_quantile_solution(rng):
    for _ in range(20):
        mu = random_measure(rng, int(rng.integers(1, 9)), 1, uniform=False)
        nu = random_measure(rng, int(rng.integers(1, 9)), 1)
        for p in (1.0, 2.0):
            assert wasserstein_lp(mu, nu, p)[0] == pytest.approx(wasserstein_1d(mu, nu, p), abs=1e-9)


def test_quantile_solution_for_split_mass():
    mu = DiscreteMeasure.dirac([0.0])
    nu = DiscreteMeasure([[-1.0], [1.0]])
    assert wasserstein_1d(mu, nu, 1.0) == pytest.approx(1.0)
    assert wasserstein_1d(nu, DiscreteMeasure([[0.0], [2.0]]), 2.0) == pytest.approx(1.0)


def test_self_distance_is_zero(rng):
    mu = random_measure(rng, 12, 2, uniform=False)
    assert wasserstein(mu, mu, 2.0) == pytest.approx(0.0, abs=1e-9)


def test_plan_has_correct_marginals(rng):
    mu = random_measure(rng, 7, 2, uniform=False)
    nu = random_measure(rng, 5, 2, uniform=False)
    value, plan = wasserstein_lp(mu, nu, 2.0)
    rows, cols = plan.marginals(mu.n_atoms, nu.n_atoms)
    np.testing.assert_allclose(rows, mu.weights, atol=1e-10)
    np.testing.assert_allclose(cols, nu.weights, atol=1e-10)
    assert value == pytest.approx(plan.total_cost ** 0.5)
    assert np.all(plan.mass > 0)


def test_dimension_mismatch_rejected():
    with pytest.raises(InvalidInputError):
        wasserstein_lp(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([0.0, 0.0]), 2.0)
    with pytest.raises(InvalidInputError):
        wasserstein_lp(DiscreteMeasure.dirac([0.0]), DiscreteMeasure.dirac([1.0]), 0.5)


def test_pair_limit(monkeypatch, rng):
    monkeypatch.setattr(config, "LP_MAX_PAIRS", 10)
    with pytest.raises(ResourceLimitError):
        wasserstein_lp(random_measure(rng, 4, 2), random_measure(rng, 4, 2), 2.0)


def test_bruteforce_size_limit(rng):
    with pytest.raises(ResourceLimitError):
        wasserstein_bruteforce(random_measure(rng, 6, 2, uniform=False), random_measure(rng, 6, 2), 2.0)


def test_metric_check_passes(rng):
    measures = [random_measure(rng, int(rng.integers(1, 8)), 2, uniform=False) for _ in range(4)]
    measures.append(DiscreteMeasure(measures[0].locations[::-1], measures[0].weights[::-1]))
    report = metric_check(measures, 2.0, seed=3)
    assert report.passed, report.failures
    assert report.distances[0, 4] == pytest.approx(0.0, abs=1e-9)


def test_metric_check_needs_measures():
    with pytest.raises(InvalidInputError):
        metric_check([], 2.0)
