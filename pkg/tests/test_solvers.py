import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discrimdes import (
    BasisSet,
    DesignSpace,
    ExpSumModel,
    FixedMean,
    GaussianObsModel,
    NestedPair,
    Precision,
    make_design,
    t_value,
)
from discrimdes.approx import remes_exchange
from discrimdes.errors import NotChebyshev, OutOfDomain, ValidationError, WrongAlternationCount
from discrimdes.solvers import (
    ds_equivalence_gap,
    enumerate_t_optimal,
    modify_design,
    solve_ds,
    solve_kl_exchange,
    solve_t_chebyshev,
    solve_t_exchange,
    support_bound,
    support_bound_check,
    verify_t_optimal,
)

SP = DesignSpace()
LIN = BasisSet.monomials(2)
ETA = FixedMean.polynomial([1, 1, 0, 1])
KL_OBS = GaussianObsModel(FixedMean.polynomial([0, 0, 0, 8]), Precision("one_minus_x2"))


def cubic(c, d):
    return FixedMean.polynomial([1, 1, c, d])


def mirrored(design):
    return make_design(-design.points, design.weights)


def test_chebyshev_closed_form():
    d, info = solve_t_chebyshev(cubic(1, 0), LIN, SP, full_output=True)
    # eta'' = 2 keeps one sign, so {1, x, eta} is a Chebyshev system
    assert info["extended_chebyshev"]
    np.testing.assert_allclose(d.points, [-1, 0, 1], atol=1e-8)
    np.testing.assert_allclose(d.weights, [0.25, 0.5, 0.25], atol=1e-8)
    d, info = solve_t_chebyshev(cubic(1, 1), LIN, SP, full_output=True)
    np.testing.assert_allclose(d.points, [-1, 1 / 3, 1], atol=1e-7)
    np.testing.assert_allclose(d.weights, [1 / 6, 1 / 2, 1 / 3], atol=1e-7)
    # eta'' = 2 + 6x changes sign at -1/3
    assert not info["extended_chebyshev"]
    assert support_bound_check(d, LIN)


def test_chebyshev_route_rejects_wrong_count():
    with pytest.raises(WrongAlternationCount):
        solve_t_chebyshev(ETA, LIN, SP)
    with pytest.raises(NotChebyshev):
        solve_t_chebyshev(ETA, BasisSet.powers([0, 2]), SP)


@pytest.mark.parametrize("cd", [(1, 0), (1, 1), (2, 1), (1, 2), (1, -1), (-3, 1)])
def test_route_agreement(cd):
    eta = cubic(*cd)
    sup = remes_exchange(eta, LIN, SP).sup_error
    d1 = solve_t_chebyshev(eta, LIN, SP)
    d2 = solve_t_exchange(eta, LIN, SP)
    P = enumerate_t_optimal(eta, LIN, SP)
    v = [t_value(d, eta, LIN).value for d in (d1, d2, P.design(0))]
    assert max(v) - min(v) <= 1e-4
    # saddle equality
    assert abs(v[0] - sup**2) <= 1e-8
    assert abs(v[1] - sup**2) <= 1e-3 * sup**2


def test_polytope_linear_vs_cubic():
    P = enumerate_t_optimal(ETA, LIN, SP)
    assert P.free_dimension == 1
    np.testing.assert_allclose(P.support, [-1, -0.5, 0.5, 1], atol=1e-6)
    np.testing.assert_allclose(P.vertices[0], [1 / 3, 1 / 2, 1 / 6, 0], atol=1e-8)
    np.testing.assert_allclose(P.vertices[1], [0, 1 / 6, 1 / 2, 1 / 3], atol=1e-8)
    assert P.contains(np.array([1 / 6, 1 / 3, 1 / 3, 1 / 6]))
    assert not P.contains(np.array([0.25, 0.25, 0.25, 0.25]))
    for i in range(len(P.vertices)):
        assert verify_t_optimal(P.design(i), ETA, LIN, SP, tol=1e-8).optimal
    assert set(P.as_dict()) >= {"support", "constraint_matrix", "vertices", "free_dimension"}


@settings(max_examples=15)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1))
def test_polytope_soundness(c, d, t):
    if abs(c) + abs(d) < 0.2:
        return
    eta = cubic(c, d)
    P = enumerate_t_optimal(eta, LIN, SP)
    V = np.array(P.vertices)
    lam = np.array([t, 1 - t] + [0.0] * (len(V) - 2)) if len(V) >= 2 else np.ones(1)
    mix = P.mixture(lam)
    assert verify_t_optimal(mix, eta, LIN, SP, tol=1e-6).optimal
    assert support_bound_check(mix, LIN, route="extremal", extremal=P.support)


@pytest.mark.parametrize("cd", [(1, 1), (2, 1), (1, 2), (3, -1)])
def test_reflection_symmetry(cd):
    c, d = cd
    a = solve_t_chebyshev(cubic(c, d), LIN, SP)
    b = solve_t_chebyshev(cubic(c, -d), LIN, SP)
    np.testing.assert_allclose(mirrored(a).points, b.points, atol=1e-7)
    np.testing.assert_allclose(mirrored(a).weights, b.weights, atol=1e-7)


@pytest.mark.parametrize("z", [-2.0, -1.0, 0.5, 3.0])
def test_design_invariant_under_scaling_of_the_extension(z):
    ref = solve_t_chebyshev(cubic(1, 2), LIN, SP)
    d = solve_t_chebyshev(cubic(z, 2 * z), LIN, SP)
    np.testing.assert_allclose(d.points, ref.points, atol=1e-7)
    np.testing.assert_allclose(d.weights, ref.weights, atol=1e-7)


def test_verify_verdicts():
    good = make_design([-1, -0.5, 0.5, 1], [1 / 6, 1 / 3, 1 / 3, 1 / 6])
    rep = verify_t_optimal(good, ETA, LIN, SP, tol=1e-8)
    assert rep.optimal and rep.violation <= 1e-8
    bad = make_design([-1, 0, 1], [1 / 3] * 3)
    rep = verify_t_optimal(bad, ETA, LIN, SP)
    assert rep.verdict == "suboptimal" and rep.gap > 0
    assert rep.as_dict()["verdict"] == "suboptimal"


def test_exchange_linear_vs_cubic():
    d, info = solve_t_exchange(ETA, LIN, SP, full_output=True)
    assert info.value == pytest.approx(0.0625, abs=1e-6)
    assert verify_t_optimal(d, ETA, LIN, SP, tol=1e-3).optimal
    P = enumerate_t_optimal(ETA, LIN, SP)
    assert P.contains(
        np.array([d.weights[np.argmin(np.abs(d.points - a))] if np.min(np.abs(d.points - a)) < 1e-4 else 0.0
                  for a in P.support]),
        tol=1e-4,
    )


def test_kl_routes():
    d, info = solve_kl_exchange(KL_OBS, LIN, SP, full_output=True)
    assert info.value == pytest.approx(1.0, abs=1e-6)
    P = enumerate_t_optimal(KL_OBS.mean, LIN, SP, precision=KL_OBS.precision)
    assert P.free_dimension == 1
    np.testing.assert_allclose(P.vertices[0], [0.5, 0.5**1.5, 0.5 - 0.5**1.5, 0], atol=1e-6)


def test_modify_design():
    t16 = make_design([-0.5, 0.5, 1], [1 / 6, 1 / 2, 1 / 3])
    m = modify_design(t16, -1, 0.02)
    np.testing.assert_allclose(m.points, [-1, -0.5, 0.5, 1])
    np.testing.assert_allclose(m.weights, [0.02, 0.98 / 6, 0.49, 0.98 / 3], atol=1e-15)
    assert modify_design(t16, -1, 0.0) is t16
    same = modify_design(t16, 1.0, 0.1)
    assert same.size == 3 and same.weights[-1] == pytest.approx(0.9 / 3 + 0.1)
    with pytest.raises(OutOfDomain):
        modify_design(t16, 2.0, 0.1)
    with pytest.raises(ValidationError):
        modify_design(t16, 0.0, 1.0)


def test_support_bounds():
    assert support_bound(LIN) == 3
    eta = FixedMean.from_model(ExpSumModel(2), [1, -1, 1, 2])
    assert support_bound(ExpSumModel(1), eta) == 3
    with pytest.raises(ValidationError):
        support_bound(LIN, route="nope")


def test_ds_linear_cubic():
    pair = NestedPair.linear(LIN, BasisSet.powers([2, 3]), [1, 1], [0, 1])
    d = solve_ds(pair, SP)
    r = 1 / np.sqrt(6)
    np.testing.assert_allclose(d.points, [-1, -r, r, 1], atol=1e-4)
    np.testing.assert_allclose(d.weights, [0.2, 0.3, 0.3, 0.2], atol=1e-4)
    assert ds_equivalence_gap(d, pair, SP) <= 2 * 1e-6


def test_ds_exponential_equivalence():
    pair = NestedPair(ExpSumModel(2), [1, -1, 1, 2], (2,))
    d = solve_ds(pair, SP)
    assert d.size == 4
    assert ds_equivalence_gap(d, pair, SP) <= 1e-5
