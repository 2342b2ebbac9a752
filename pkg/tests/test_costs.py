import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stratclass.costs import EUCLIDEAN, SQUARED, CostFn, cost, cost_grad_z, cost_prox
from stratclass.numerics import finite_diff_grad, rel_err

EUC, SQ = CostFn(EUCLIDEAN), CostFn(SQUARED)
vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10))


def test_cost_examples():
    assert cost(EUC, [1, 1], [1, 1]) == 0.0
    assert cost(EUC, [0, 0], [3, 4]) == 5.0
    assert cost(SQ, [0, 0], [3, 4]) == 25.0


def test_grad_examples():
    assert np.array_equal(cost_grad_z(EUC, [1.0, 2.0], [1.0, 2.0]), [0.0, 0.0])
    np.testing.assert_allclose(cost_grad_z(EUC, [0, 0], [3, 4]), [0.6, 0.8], atol=1e-6)
    assert np.array_equal(cost_grad_z(SQ, [0, 0], [3, 4]), [6.0, 8.0])


def test_batch_costs():
    X = np.zeros((3, 2))
    Z = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    assert np.array_equal(cost(EUC, X, Z), [5.0, 0.0, 1.0])
    assert cost_grad_z(EUC, X, Z).shape == (3, 2)


def test_invalid():
    with pytest.raises(ValueError):
        CostFn("manhattan")
    with pytest.raises(ValueError):
        CostFn(EUCLIDEAN, delta=0.0)
    with pytest.raises(ValueError):
        cost(EUC, [0, 0], [0, 0, 0])


@settings(max_examples=100)
@given(vec3, vec3, vec3)
def test_euclidean_triangle_inequality(x, y, z):
    assert cost(EUC, x, z) <= cost(EUC, x, y) + cost(EUC, y, z) + 1e-9


@settings(max_examples=100)
@given(vec3, vec3)
def test_nonnegative_and_symmetric(x, z):
    for c in (EUC, SQ):
        assert cost(c, x, z) >= 0
        assert cost(c, x, z) == pytest.approx(cost(c, z, x))


@pytest.mark.parametrize("cfn", [EUC, SQ])
def test_grad_matches_fd(cfn, rng):
    for _ in range(50):
        x, z = rng.normal(size=3), rng.normal(size=3)
        fd = finite_diff_grad(lambda v: cost(cfn, x, v), z)
        assert rel_err(cost_grad_z(cfn, x, z), fd) < 1e-4


@pytest.mark.parametrize("cfn", [EUC, SQ])
def test_prox_minimizes_objective(cfn, rng):
    # the prox should beat random perturbations of itself
    for _ in range(30):
        x, v = rng.normal(size=2), rng.normal(size=2) * 2
        t = rng.uniform(0.01, 2.0)
        p = cost_prox(cfn, x, v, t)
        f = lambda z: t * cost(cfn, x, z) + 0.5 * np.sum((z - v) ** 2)
        fp = f(p)
        for d in rng.normal(size=(20, 2)) * 1e-3:
            assert fp <= f(p + d) + 1e-12


def test_euclidean_prox_soft_threshold():
    x = np.zeros(2)
    np.testing.assert_allclose(cost_prox(EUC, x, [3.0, 4.0], 1.0), [2.4, 3.2])
    assert np.array_equal(cost_prox(EUC, x, [0.3, 0.4], 1.0), [0.0, 0.0])
    out = cost_prox(EUC, np.zeros((2, 2)), np.array([[3.0, 4.0], [3.0, 4.0]]), np.array([1.0, 10.0]))
    np.testing.assert_allclose(out, [[2.4, 3.2], [0.0, 0.0]])
