import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrimdes.core import (
    Design,
    DesignSpace,
    ExactDesign,
    det,
    make_design,
    merge_support,
    mix,
    moment_matrix,
    round_design,
    solve_sym,
    weighted_lstsq,
)
from discrimdes.errors import BadWeights, OutOfDomain, TooFewRuns

weights_st = st.lists(st.floats(0.01, 10.0), min_size=1, max_size=8)


@st.composite
def designs(draw):
    raw = draw(weights_st)
    pts = draw(st.lists(st.floats(-1, 1), min_size=len(raw), max_size=len(raw)))
    w = np.array(raw) / np.sum(raw)
    return make_design(pts, w / w.sum())


def test_design_space_validation():
    with pytest.raises(OutOfDomain):
        DesignSpace(1.0, -1.0)
    with pytest.raises(OutOfDomain):
        DesignSpace(-np.inf, 1.0)
    g = DesignSpace(-1, 2, 101).grid()
    assert g[0] == -1 and g[-1] == 2 and g.size == 101


def test_make_design_canonicalises():
    d = make_design([0.5, -1.0, 0.5, 0.2], [0.25, 0.25, 0.25, 0.25])
    assert d.points.tolist() == [-1.0, 0.2, 0.5]
    assert d.weights.tolist() == [0.25, 0.25, 0.5]
    d = make_design([0.0, 1.0], [1.0, 0.0])
    assert d.size == 1


@pytest.mark.parametrize(
    "pts, w, exc",
    [
        ([0.0, 1.0], [0.5], BadWeights),
        ([0.0, 1.0], [0.7, 0.7], BadWeights),
        ([0.0, 1.0], [1.5, -0.5], BadWeights),
        ([], [], BadWeights),
        ([np.nan], [1.0], BadWeights),
    ],
)
def test_make_design_rejects(pts, w, exc):
    with pytest.raises(exc):
        make_design(pts, w)


def test_make_design_domain():
    with pytest.raises(OutOfDomain):
        make_design([2.0], [1.0], DesignSpace())


@given(designs())
def test_make_design_idempotent(d):
    e = make_design(d.points, d.weights)
    assert np.array_equal(e.points, d.points)
    assert np.array_equal(e.weights, d.weights)
    assert np.all(np.diff(d.points) > 0)
    assert abs(d.weights.sum() - 1.0) < 1e-12


@given(designs(), st.integers(8, 200))
def test_round_design_properties(d, n):
    if n < d.size:
        with pytest.raises(TooFewRuns):
            round_design(d, n)
        return
    e = round_design(d, n)
    assert e.counts.sum() == n
    # largest-remainder apportionment is within one run of the quota
    assert np.all(np.abs(e.counts - n * d.weights) < 1.0 + 1e-9)


def test_round_design_known():
    d = make_design([-1, -0.5, 0.5, 1], [0.02, 0.98 / 6, 0.49, 0.98 / 3])
    assert round_design(d, 50).counts.tolist() == [1, 8, 25, 16]
    d = make_design([-1, 0, 1], [1 / 3, 1 / 3, 1 / 3])
    # ties go to the smaller index
    assert round_design(d, 4).counts.tolist() == [2, 1, 1]
    with pytest.raises(TooFewRuns):
        ExactDesign(np.array([0.0, 1.0]), [1, 1], 3)


@given(designs(), st.floats(0.0, 0.5))
def test_merge_support(d, tol):
    m = merge_support(d, tol)
    assert abs(m.weights.sum() - 1.0) < 1e-12
    assert np.all(np.diff(m.points) >= tol - 1e-12) or m.size == 1 or tol == 0
    # first moment is preserved
    assert abs(m.points @ m.weights - d.points @ d.weights) < 1e-12


def test_mix():
    a = make_design([-1, 1], [0.5, 0.5])
    b = make_design([0.0], [1.0])
    m = mix(a, b, 0.2)
    assert m.points.tolist() == [-1, 0, 1]
    np.testing.assert_allclose(m.weights, [0.4, 0.2, 0.4])


def test_linear_algebra():
    rng = np.random.default_rng(0)
    G = rng.normal(size=(10, 3))
    w = rng.dirichlet(np.ones(10))
    M = moment_matrix(G, w)
    np.testing.assert_allclose(M, G.T @ np.diag(w) @ G, atol=1e-14)
    b = rng.normal(size=3)
    np.testing.assert_allclose(M @ solve_sym(M, b), b, atol=1e-10)
    assert det(np.zeros((0, 0))) == 1.0
    y = G @ [1.0, 2.0, 3.0]
    beta, rank = weighted_lstsq(G, y, w)
    assert rank == 3
    np.testing.assert_allclose(beta, [1, 2, 3], atol=1e-10)


def test_design_repr_and_dict():
    d = Design(np.array([0.0]), np.array([1.0]))
    assert d.as_dict() == {"points": [0.0], "weights": [1.0]}
    assert "0" in repr(d)
