import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrimdes import (
    BasisSet,
    DesignSpace,
    ExpSumModel,
    FixedMean,
    LinearModel,
    NestedPair,
    Precision,
    check_chebyshev_system,
    eval_gradient,
    eval_mean,
)
from discrimdes.errors import BadTheta, ValidationError


def test_bases():
    x = np.array([-1.0, 0.5, 2.0])
    np.testing.assert_allclose(BasisSet.monomials(3).evaluate(x), np.c_[np.ones(3), x, x**2])
    np.testing.assert_allclose(BasisSet.powers([2, 3]).evaluate(x), np.c_[x**2, x**3])
    np.testing.assert_allclose(BasisSet.exponentials([1.0]).evaluate(x), np.exp(-x)[:, None])
    combined = BasisSet.monomials(2) + BasisSet.powers([2])
    assert combined.m == 3


def test_linear_model_mean_gradient():
    m = LinearModel(BasisSet.monomials(3))
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(m.mean([1, 2, 3], x), 1 + 2 * x + 3 * x**2)
    assert eval_mean(m, [1, 2, 3], 0.5) == pytest.approx(2.75)
    np.testing.assert_allclose(eval_gradient(m, [1, 2, 3], 0.5), [1, 0.5, 0.25])
    with pytest.raises(BadTheta):
        m.mean([1, 2], x)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_expsum_gradient_matches_finite_differences(a1, b1, a2, b2):
    m = ExpSumModel(2)
    th = np.array([a1, b1, a2, b2])
    x = np.linspace(-1, 1, 7)
    G = m.gradient(th, x)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (m.mean(th + e, x) - m.mean(th - e, x)) / (2 * h)
        np.testing.assert_allclose(G[:, j], fd, rtol=1e-6, atol=1e-6)


def test_expsum_validation():
    with pytest.raises(BadTheta):
        ExpSumModel.fixed([(1, 1), (1, 1)])
    with pytest.raises(ValidationError):
        ExpSumModel(0)
    m = ExpSumModel.fixed([(1, -1), (1, -2)])
    np.testing.assert_allclose(m.theta, [1, -1, 1, -2])
    assert m.varisolvence_degree(m.theta) == 4


def test_fixed_means():
    x = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(FixedMean.polynomial([1, 1, 0, 1])(x), 1 + x + x**3)
    np.testing.assert_allclose(FixedMean.exponential_sum([(1, -1), (2, 3)])(x), np.exp(x) + 2 * np.exp(-3 * x))
    np.testing.assert_allclose(FixedMean.zero()(x), 0.0)


def test_precision():
    x = np.array([-1.0, 0.0, 0.5])
    np.testing.assert_allclose(Precision("one_minus_x2")(x), 1 - x**2)
    np.testing.assert_allclose(Precision("constant", 2.0)(x), 2.0)


def test_nested_pair():
    p = NestedPair.linear(BasisSet.monomials(2), BasisSet.powers([2, 3]), [1, 1], [0, 1])
    assert (p.m1, p.m0, p.m2) == (4, 2, 2)
    assert p.reduced_indices == (0, 1)
    np.testing.assert_allclose(p.theta0, [0, 1])
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(p.true_mean()(x), 1 + x + x**3)
    with pytest.raises(ValidationError):
        NestedPair(ExpSumModel(2), [1, 2, 3, 4], (0, 1, 2, 3))
    with pytest.raises(BadTheta):
        NestedPair(ExpSumModel(2), [1, 2, 3], (2,))


def test_chebyshev_system_check():
    sp = DesignSpace()
    assert check_chebyshev_system(BasisSet.monomials(4), sp)
    # {1, x^2} is not a Chebyshev system on a symmetric interval
    assert not check_chebyshev_system(BasisSet.powers([0, 2]), sp)
    assert check_chebyshev_system(BasisSet.exponentials([-1.0, 0.5, 2.0]), sp)
    with pytest.raises(ValidationError):
        check_chebyshev_system(BasisSet.monomials(2), sp, trials=0)
