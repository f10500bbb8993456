import numpy as np
import pytest

from cowgan.errors import BudgetError, ContractError, DimensionError
from cowgan.oracle import (brute_force_w1, exact_w1, is_median, median_closed_form,
                           median_interval, median_minimizer, w1_sorted_1d)
from cowgan.transport import check_admissibility, evaluate_objectives

from helpers import random_admissible_potential


def test_identical_clouds_cost_zero(rng):
    x = rng.normal(size=(10, 3))
    c = exact_w1(x, x[::-1])
    assert c.cost == 0.0
    assert sorted(c.assignment) == list(range(10))


def test_two_by_two():
    c = exact_w1([[0.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]])
    assert c.cost == 1.0
    np.testing.assert_array_equal(c.assignment, [0, 1])


@pytest.mark.parametrize("seed", range(10))
def test_matches_all_5040_permutations(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(7, 2)), rng.normal(size=(7, 2))
    assert exact_w1(x, y).cost == pytest.approx(brute_force_w1(x, y), abs=1e-12)


def test_contracts():
    with pytest.raises(ContractError):
        exact_w1(np.zeros((3, 2)), np.zeros((4, 2)))
    with pytest.raises(BudgetError):
        exact_w1(np.zeros((5, 1)), np.zeros((5, 1)), max_n=4)
    with pytest.raises(DimensionError):
        w1_sorted_1d(np.zeros((3, 2)), np.zeros((3, 2)))


def test_sorted_1d_hand_example():
    assert w1_sorted_1d([0.0, 1.0], [2.0, 3.0]) == 2.0
    assert w1_sorted_1d([5.0, 1.0], [1.0, 5.0]) == 0.0
    assert w1_sorted_1d([0.0, 1.0], [2.0, 3.0], p=2) == 4.0


def test_sorted_1d_matches_assignment(rng):
    for _ in range(50):
        n = int(rng.integers(1, 40))
        x, y = rng.normal(size=n), rng.normal(size=n) * 2
        assert abs(w1_sorted_1d(x, y) - exact_w1(x, y).cost) < 1e-12


def test_metric_axioms(rng):
    for _ in range(20):
        a, b, c = (rng.normal(size=(12, 2)) for _ in range(3))
        ab = exact_w1(a, b).cost
        assert ab == pytest.approx(exact_w1(b, a).cost, abs=1e-12)
        assert exact_w1(a, c).cost <= ab + exact_w1(b, c).cost + 1e-10


def test_weak_duality_for_admissible_potentials(rng):
    for _ in range(30):
        phi = random_admissible_potential(rng)
        x, y = rng.uniform(-3, 6, size=(15, 2)), rng.uniform(-3, 6, size=(15, 2))
        assert not check_admissibility(phi, x, y)
        assert evaluate_objectives(phi, x, y).j1 <= exact_w1(x, y).cost + 1e-9


def test_median_odd():
    cert = median_minimizer([0.0, 1.0, 10.0], step=1.0)
    assert cert.minimizer == 1.0
    assert cert.value == 10.0
    assert cert.closed_form == 10.0


def test_median_flat_interval():
    cert = median_minimizer([0.0, 2.0])
    assert cert.interval == (0.0, 2.0)
    np.testing.assert_allclose(cert.objective, 2.0)
    assert cert.in_interval


def test_median_even_four_points():
    cert = median_minimizer([0.0, 1.0, 2.0, 3.0])
    assert cert.closed_form == 4.0
    assert cert.value == pytest.approx(4.0)
    assert 1.0 <= cert.minimizer <= 2.0
    assert median_interval([3, 1, 2, 0]) == (1.0, 2.0)


def test_median_certificate_matches_median_definition(rng):
    for _ in range(30):
        xs = rng.normal(size=int(rng.integers(2, 10)))
        cert = median_minimizer(xs)
        assert cert.in_interval
        assert is_median(xs, cert.minimizer)
        assert abs(cert.value - median_closed_form(xs)) <= 1e-9


def test_median_contracts():
    with pytest.raises(ContractError):
        median_minimizer([1.0])
    with pytest.raises(ContractError):
        median_minimizer([0.0, 1.0], lo=2.0, hi=1.0)
