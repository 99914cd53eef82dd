"""Discrimination criteria evaluated at a fixed design.

* T-value: ``min_theta sum_i w_i (eta(x_i) - eta2(x_i, theta))**2``.
* KL-value: the same with a precision weight ``lambda(x)`` in each term.
* D_s-value: ``det M_full / det M_reduced`` for a nested pair.
* Gram ratio and Schur noncentrality: closed forms of the T-value for
  linear rivals and nested linear pairs.
"""

from dataclasses import dataclass
import math

import numpy as np

from .core import det, moment_matrix, solve_sym
from .errors import SingularReduced
from .fitting import fit
from .models import family_from_basis_or_model

SINGULAR_DET = 1e-14


@dataclass
class CriterionValue:
    value: float
    minimizer: np.ndarray
    residual_at_support: np.ndarray
    singular: bool = False

    def __float__(self):
        return float(self.value)


@dataclass
class InfoMatrices:
    M_full: np.ndarray
    M_reduced: np.ndarray
    M_extended: np.ndarray
    schur: np.ndarray


def _wsum(w, r):
    return math.fsum((w * r * r).tolist())


def t_value(design, eta, rival, space=None, precision=None, starts=()):
    """Inner weighted least squares of ``eta`` on the rival family.

    ``precision`` (a callable ``lambda(x)``) multiplies each weight. Rank
    deficient linear fits return the minimum-norm minimiser and
    ``singular=True``; the value itself is unaffected.
    """
    family = family_from_basis_or_model(rival)
    x = design.points
    lam = np.ones_like(x) if precision is None else np.asarray(precision(x), dtype=float)
    w = design.weights * lam
    y = eta(x)
    res = fit(family, x, y, w, starts=starts)
    r = y - family.mean(res.theta, x)
    return CriterionValue(_wsum(w, r), res.theta, r, res.rank_deficient)


def kl_distance_gaussian(obs_true, rival, theta, x):
    """``lambda(x) * (eta_true(x) - eta_rival(x, theta))**2`` (no factor 1/2)."""
    family = family_from_basis_or_model(rival)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    d = obs_true.precision(xa) * (obs_true.mean(xa) - family.mean(theta, xa)) ** 2
    return float(d[0]) if np.ndim(x) == 0 else d


def kl_value(design, obs_true, rival, space=None, starts=()):
    """``inf_theta sum_i w_i d_KL(x_i, theta)`` for shared precision."""
    return t_value(design, obs_true.mean, rival, space, precision=obs_true.precision, starts=starts)


def _check_reduced(M):
    d = det(M)
    if d < SINGULAR_DET:
        raise SingularReduced(f"reduced information matrix is singular (det = {d:.3e})")
    return d


def _gram_det(F, w):
    """``det(F^T W F)`` from the QR factor of ``W^(1/2) F`` (no squared conditioning)."""
    if F.shape[0] < F.shape[1]:
        return 0.0
    R = np.linalg.qr(np.sqrt(w)[:, None] * F, mode="r")
    return float(np.prod(np.diag(R) ** 2))


def gram_ratio(design, eta, basis):
    """``det M_extended / det M_reduced`` with ``eta`` appended to ``basis``."""
    F = basis.evaluate(design.points)
    w = design.weights
    dM = _gram_det(F, w)
    if dM < SINGULAR_DET:
        raise SingularReduced(f"reduced information matrix is singular (det = {dM:.3e})")
    Ft = np.hstack([F, eta(design.points)[:, None]])
    if design.size < Ft.shape[1]:
        return 0.0
    return max(_gram_det(Ft, w) / dM, 0.0)


def _pair_matrices(design, pair):
    G = pair.gradients(design.points)
    M1 = moment_matrix(G, design.weights)
    red = list(pair.reduced_indices)
    ext = list(pair.extension)
    return M1, M1[np.ix_(red, red)], M1[np.ix_(ext, ext)], M1[np.ix_(ext, red)]


def ds_value(design, pair):
    """``|M_full| / |M_reduced|`` (local at ``pair.theta`` for nonlinear models)."""
    M1, M2, _, _ = _pair_matrices(design, pair)
    d2 = _check_reduced(M2)
    if design.size < pair.m1:
        return 0.0
    return max(det(M1) / d2, 0.0)


def schur_complement(design, pair):
    """Information for the extension coordinates after removing the rest."""
    _, M2, Mee, Mer = _pair_matrices(design, pair)
    _check_reduced(M2)
    S = Mee - Mer @ solve_sym(M2, Mer.T)
    return 0.5 * (S + S.T)


def schur_noncentrality(design, pair):
    """``theta0^T M_11.2 theta0``."""
    S = schur_complement(design, pair)
    t0 = pair.theta0
    return max(float(t0 @ S @ t0), 0.0)


def information_matrices(design, pair):
    """All matrices of a nested pair at ``design``.

    ``M_extended`` appends the true mean ``eta`` (the full model at
    ``pair.theta``) to the reduced gradient.
    """
    M1, M2, _, _ = _pair_matrices(design, pair)
    G = pair.gradients(design.points)[:, list(pair.reduced_indices)]
    eta = pair.full.mean(pair.theta, design.points)
    Mt = moment_matrix(np.hstack([G, eta[:, None]]), design.weights)
    return InfoMatrices(M1, M2, Mt, schur_complement(design, pair))


def ds_directional(design, pair, x):
    """``g^T M_full^-1 g - g_R^T M_reduced^-1 g_R`` at points ``x``."""
    M1, M2, _, _ = _pair_matrices(design, pair)
    G = pair.gradients(np.atleast_1d(x))
    red = list(pair.reduced_indices)
    Gr = G[:, red]
    a = np.einsum("ij,ij->i", G, solve_sym(M1, G.T).T)
    b = np.einsum("ij,ij->i", Gr, solve_sym(M2, Gr.T).T)
    return a - b


__all__ = [
    "CriterionValue",
    "InfoMatrices",
    "ds_directional",
    "ds_value",
    "gram_ratio",
    "information_matrices",
    "kl_distance_gaussian",
    "kl_value",
    "schur_complement",
    "schur_noncentrality",
    "t_value",
]
