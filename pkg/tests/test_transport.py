import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowgan import autodiff as ad
from cowgan.errors import ContractError
from cowgan.measures import EmpiricalMeasure, benchmark_4x4_gaussians
from cowgan.transport import (UndefinedEstimateError, c_transform, check_admissibility,
                              cone_potential, evaluate_objectives, lipschitz_estimate,
                              linear_potential)

from helpers import plant_violation, random_admissible_potential

TOL = 1e-9


def const(c):
    return lambda x: ad.Tensor(np.full(len(x), c))


def test_c_transform_of_dirac():
    x, y = np.array([[1.0, 2.0]]), np.array([[4.0, 6.0]])
    vals, idx = c_transform([0.0], x, y)
    assert vals.item() == 5.0 and idx[0] == 0
    vals, _ = c_transform([1.5], x, y)
    assert vals.item() == 5.0 - 1.5


def test_c_transform_two_point_support():
    vals, idx = c_transform([0.5, 0.0], [[0.0, 0.0], [1.0, 0.0]], [[0.0, 1.0]])
    assert vals.item() == 0.5
    assert idx[0] == 0


def test_c_transform_self_match_bound(rng):
    sup = rng.normal(size=(6, 2))
    phi = rng.normal(size=6)
    vals, _ = c_transform(phi, sup, sup)
    assert np.all(vals.data <= -phi + 1e-15)


def test_c_transform_errors():
    with pytest.raises(ContractError):
        c_transform([], np.zeros((0, 2)), [[0.0, 0.0]])
    with pytest.raises(ContractError):
        c_transform([1.0, 2.0], [[0.0, 0.0]], [[0.0, 0.0]])


def test_constant_potential_on_shared_support(rng):
    pts = rng.normal(size=(7, 2))
    rep = evaluate_objectives(const(3.0), pts, pts[rng.permutation(7)])
    assert rep.values() == pytest.approx((0, 0, 0, 0), abs=1e-12)


def test_violation_witness_in_one_dimension():
    rep = evaluate_objectives(lambda x: 2.0 * ad.as_tensor(x).reshape(-1), [[1.0]], [[0.0]])
    assert rep.j1 == 2.0
    assert rep.j2 == 1.0
    assert rep.j2 < rep.j1


def test_unit_linear_potential_is_ordered(rng):
    mu, nu = benchmark_4x4_gaussians()
    for _ in range(20):
        a = rng.normal(size=2)
        phi = linear_potential(a / np.linalg.norm(a))
        rep = evaluate_objectives(phi, mu.sample(32, rng), nu.sample(32, rng))
        assert rep.ordered(TOL)


def test_consistency_with_manual_c_transform(rng):
    phi = cone_potential(rng.normal(size=(3, 2)), rng.normal(size=3))
    x, y = rng.normal(size=(9, 2)), rng.normal(size=(9, 2)) + 1
    rep = evaluate_objectives(phi, x, y)
    fx = phi(ad.Tensor(x)).data
    vals, idx = c_transform(fx, x, y)
    assert abs(rep.j2 - (fx.mean() + vals.data.mean())) < 1e-12
    np.testing.assert_array_equal(rep.argmin_nu, idx)


def test_mirror_symmetry(rng):
    net_phi = linear_potential([0.7, -2.0], 0.3)
    neg_phi = lambda x: ad.neg(net_phi(x))
    x, y = rng.normal(size=(8, 2)), rng.normal(size=(8, 2))
    assert evaluate_objectives(net_phi, x, y).j2 == pytest.approx(
        evaluate_objectives(neg_phi, y, x).j3, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_ordering_for_admissible_families(seed):
    rng = np.random.default_rng(seed)
    phi = random_admissible_potential(rng)
    n = int(rng.integers(1, 40))
    x, y = rng.uniform(-3, 6, size=(n, 2)), rng.uniform(-3, 6, size=(n, 2))
    rep = evaluate_objectives(phi, x, y)
    assert rep.ordered(TOL)
    # c-transform dominance: phi^c(y; mu_n) >= -phi(y)
    fx, fy = phi(ad.Tensor(x)).data, phi(ad.Tensor(y)).data
    vals, _ = c_transform(fx, x, y)
    assert np.all(vals.data >= -fy - TOL)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_violation_pushes_j2_j3_below_j1(seed):
    rng = np.random.default_rng(seed)
    phi, x, y, _ = plant_violation(rng)
    viol = check_admissibility(phi, x[None], y[None])
    assert len(viol) == 1
    rep = evaluate_objectives(phi, EmpiricalMeasure.dirac(x), EmpiricalMeasure.dirac(y))
    assert rep.j2 < rep.j1 and rep.j3 < rep.j1


def test_admissible_potential_has_no_violations(rng):
    phi = cone_potential([[0.5, 0.5]], [0.0])
    assert check_admissibility(phi, rng.normal(size=(30, 2)), rng.normal(size=(30, 2))) == []


def test_violation_excess():
    phi = lambda x: 2.0 * ad.as_tensor(x).data[:, 0]
    viol = check_admissibility(phi, [[1.0, 0.0]], [[0.0, 0.0]])
    assert len(viol) == 1
    assert viol[0].excess == pytest.approx(1.0)


def test_admissibility_is_one_sided():
    phi = lambda x: 2.0 * ad.as_tensor(x).data[:, 0]
    assert check_admissibility(phi, [[1.0, 0.0]], [[0.0, 0.0]])
    assert not check_admissibility(phi, [[0.0, 0.0]], [[1.0, 0.0]])


def test_violations_sorted_by_excess(rng):
    phi = lambda x: 3.0 * ad.as_tensor(x).data[:, 0]
    viol = check_admissibility(phi, rng.normal(size=(10, 2)), rng.normal(size=(10, 2)))
    ex = [v.excess for v in viol]
    assert ex == sorted(ex, reverse=True) and len(ex) > 0


def test_lipschitz_of_unit_linear(rng):
    phi = linear_potential([1.0, 0.0])
    est = lipschitz_estimate(phi, rng.normal(size=(20, 2)), rng.normal(size=(20, 2)))
    assert est <= 1.0 + 1e-12 and est > 0.5
    est = lipschitz_estimate(phi, [[0.0, 0.0]], [[3.0, 0.0]])
    assert est == pytest.approx(1.0)


def test_lipschitz_one_dimensional():
    phi = lambda x: 2.0 * ad.as_tensor(x).data[:, 0]
    assert lipschitz_estimate(phi, [[0.0]], [[1.0]]) == 2.0


def test_lipschitz_within_skips_diagonal(rng):
    phi = linear_potential([0.0, 1.0])
    pts = rng.normal(size=(64, 2))
    assert lipschitz_estimate(phi, pts) <= 1.0 + 1e-12


def test_lipschitz_all_coincident():
    with pytest.raises(UndefinedEstimateError):
        lipschitz_estimate(linear_potential([1.0]), [[1.0]], [[1.0]])
