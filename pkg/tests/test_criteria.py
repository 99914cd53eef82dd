import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from discrimdes import (
    BasisSet,
    ExpSumModel,
    FixedMean,
    GaussianObsModel,
    NestedPair,
    Precision,
    make_design,
)
from discrimdes.approx import grid_minimax
from discrimdes.criteria import (
    ds_directional,
    ds_value,
    gram_ratio,
    information_matrices,
    kl_distance_gaussian,
    kl_value,
    schur_complement,
    schur_noncentrality,
    t_value,
)
from discrimdes.errors import SingularReduced

from _util import random_design

LIN = BasisSet.monomials(2)
EXT = BasisSet.powers([2, 3])
ETA = FixedMean.polynomial([1, 1, 0, 1])
seeds = st.integers(0, 2**32 - 1)


def test_t_value_on_optimal_family():
    # xi_p has weights (p - 1/6, p, 2/3 - p, 1/2 - p) for p in [1/6, 1/2]
    for p in (1 / 6, 1 / 4, 1 / 3, 1 / 2):
        d = make_design([-1, -0.5, 0.5, 1], [p - 1 / 6, p, 2 / 3 - p, 1 / 2 - p])
        assert t_value(d, ETA, LIN).value == pytest.approx(0.0625, abs=1e-12)


def test_t_value_uniform_suboptimal():
    d = make_design([-1, 0, 1], [1 / 3] * 3)
    v = t_value(d, ETA, LIN).value
    assert 0 < v < 0.0625


@given(seeds)
def test_gram_identity(seed):
    d = random_design(np.random.default_rng(seed))
    a = t_value(d, ETA, LIN).value
    assert gram_ratio(d, ETA, LIN) == pytest.approx(a, rel=1e-9, abs=1e-14)


@given(seeds)
def test_schur_identity_and_polarization(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 4, 8)
    t2 = rng.normal(size=2)
    a, b = rng.normal(size=2), rng.normal(size=2)

    def delta(t0):
        return t_value(d, NestedPair.linear(LIN, EXT, t2, t0).true_mean(), LIN).value

    pair = NestedPair.linear(LIN, EXT, t2, a)
    assert schur_noncentrality(d, pair) == pytest.approx(delta(a), rel=1e-8, abs=1e-13)
    # quadratic form in theta0: the polarization identity recovers a^T S b
    S = schur_complement(d, pair)
    polar = (delta(a + b) - delta(a - b)) / 4
    assert polar == pytest.approx(a @ S @ b, rel=1e-7, abs=1e-12)


@given(seeds)
def test_zero_weight_atom_is_inert(seed):
    rng = np.random.default_rng(seed)
    d = random_design(rng, 4, 6)
    x_new = float(rng.uniform(-1, 1))
    d2 = make_design(np.r_[d.points, x_new], np.r_[d.weights, 0.0])
    pair = NestedPair.linear(LIN, EXT, [1, 1], [0, 1])
    assert t_value(d2, ETA, LIN).value == t_value(d, ETA, LIN).value
    assert ds_value(d2, pair) == ds_value(d, pair)


@given(seeds)
def test_t_value_bounded_by_minimax(seed):
    d = random_design(np.random.default_rng(seed))
    sup = grid_minimax(ETA, LIN, grid_n=2001).sup_error
    assert t_value(d, ETA, LIN).value <= sup**2 + 1e-6


@given(seeds)
def test_homoscedastic_kl_equals_t(seed):
    d = random_design(np.random.default_rng(seed))
    obs = GaussianObsModel(ETA, Precision("constant", 1.0))
    assert kl_value(d, obs, LIN).value == pytest.approx(t_value(d, ETA, LIN).value, rel=1e-10, abs=1e-15)


def test_kl_example_value():
    obs = GaussianObsModel(FixedMean.polynomial([0, 0, 0, 8]), Precision("one_minus_x2"))
    s = np.array([-0.9238795325112867, -0.3826834323650898, 0.3826834323650898, 0.9238795325112867])
    v1 = np.array([0.5, 0.3535533905932738, 0.1464466094067262, 0.0])
    v2 = v1[::-1]
    d = make_design(s, 0.75 * v1 + 0.25 * v2)
    assert kl_value(d, obs, LIN).value == pytest.approx(1.0, abs=1e-8)
    assert kl_distance_gaussian(obs, LIN, [0, 4], 0.0) == 0.0
    assert kl_distance_gaussian(obs, LIN, [0, 4], 0.5) == pytest.approx(0.75 * (1 - 2) ** 2)


def test_rival_contains_truth():
    d = make_design([-1, 0, 1], [1 / 3] * 3)
    assert t_value(d, FixedMean.polynomial([3, -2]), LIN).value == pytest.approx(0.0, abs=1e-25)
    assert gram_ratio(d, FixedMean.polynomial([3, -2]), LIN) == pytest.approx(0.0, abs=1e-14)


def test_singular_and_small_supports():
    with pytest.raises(SingularReduced):
        gram_ratio(make_design([0.3], [1.0]), ETA, LIN)
    assert gram_ratio(make_design([-1, 1], [0.5, 0.5]), ETA, LIN) == 0.0
    r = t_value(make_design([0.3], [1.0]), ETA, LIN)
    assert r.singular and r.value == pytest.approx(0.0, abs=1e-25)
    pair = NestedPair.linear(LIN, EXT, [1, 1], [0, 1])
    assert ds_value(make_design([-1, 0, 1], [1 / 3] * 3), pair) == 0.0


def test_d2_design_value_and_equivalence():
    pair = NestedPair.linear(LIN, EXT, [1, 1], [0, 1])
    r = 1 / np.sqrt(6)
    d = make_design([-1, -r, r, 1], [0.2, 0.3, 0.3, 0.2])
    assert ds_value(d, pair) == pytest.approx(1 / 108, rel=1e-12)
    x = np.linspace(-1, 1, 2001)
    assert ds_directional(d, pair, x).max() == pytest.approx(2.0, abs=1e-9)
    rng = np.random.default_rng(7)
    best = 0.0
    for _ in range(2000):
        pts = np.sort(rng.uniform(-1, 1, 4))
        best = max(best, ds_value(make_design(pts, rng.dirichlet(np.ones(4))), pair))
    assert best < ds_value(d, pair)


def test_information_matrices_shapes():
    pair = NestedPair(ExpSumModel(2), [1, -1, 1, 2], (2,))
    d = make_design([-1, -0.3, 0.4, 1], [0.25] * 4)
    im = information_matrices(d, pair)
    assert im.M_full.shape == (4, 4) and im.M_reduced.shape == (3, 3)
    assert im.M_extended.shape == (4, 4) and im.schur.shape == (1, 1)
    np.testing.assert_allclose(
        ds_value(d, pair), np.linalg.det(im.M_full) / np.linalg.det(im.M_reduced), rtol=1e-10
    )
