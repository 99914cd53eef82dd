"""Weighted least-squares fits for linear and exponential-sum families.

Exponential sums are fitted by Levenberg-Marquardt from several starts. Start
amplitudes always come from the linear least-squares solution at the start's
rates (variable projection), which keeps starts sensible even when the rates
are drawn from a wide box.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from . import kernels
from .core import weighted_lstsq
from .errors import FitFailure
from .models import ExpSumModel, family_from_basis_or_model


@dataclass
class FitResult:
    theta: np.ndarray
    rss: float
    rank_deficient: bool = False
    starts_tried: int = 1


def _rate_scan_grid(model, n_terms, per_axis):
    lo, hi = model.rate_bounds
    axis = np.linspace(lo, hi, per_axis)
    if n_terms == 1:
        return axis[:, None]
    return np.array(list(combinations(axis, n_terms)), dtype=float)


def halton_rates(model, count, skip=1):
    """Deterministic low-discrepancy rate vectors inside the rate box."""
    lo, hi = model.rate_bounds
    sampler = qmc.Halton(d=model.n_terms, scramble=False)
    if skip:
        sampler.fast_forward(skip)
    u = sampler.random(count)
    r = lo + (hi - lo) * u
    return np.sort(r, axis=1)


def amplitudes_for_rates(x, y, w, rates):
    """Variable projection: best amplitudes for each row of ``rates``."""
    rates = np.ascontiguousarray(np.atleast_2d(rates), dtype=float)
    rss, amps = kernels.varpro_rss(
        np.ascontiguousarray(x, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(w, dtype=float),
        rates,
    )
    return rss, amps


def _interleave(amps, rates):
    th = np.empty(2 * amps.size)
    th[0::2] = amps
    th[1::2] = rates
    return th


def fit_expsum(model, x, y, w=None, starts=(), scan=True, per_axis=None, n_best=3, max_iter=200):
    """Multi-start LM fit of an :class:`ExpSumModel`.

    ``starts`` are full parameter vectors (their amplitudes are re-projected);
    with ``scan`` the best ``n_best`` points of a rate grid are added.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.ascontiguousarray(w, dtype=float)
    k = model.n_terms
    rate_sets = [np.sort(np.asarray(s, dtype=float)[1::2]) for s in starts]
    if scan:
        per_axis = per_axis or (161 if k == 1 else (41 if k == 2 else 13))
        grid = _rate_scan_grid(model, k, per_axis)
        rss, _ = amplitudes_for_rates(x, y, w, grid)
        rss = np.where(np.isfinite(rss), rss, np.inf)
        order = np.argsort(rss, kind="stable")
        rate_sets.extend(grid[order[:n_best]])
    if not rate_sets:
        raise FitFailure("no starting values for exponential fit")
    R = np.clip(np.array(rate_sets), *model.rate_bounds)
    _, A = amplitudes_for_rates(x, y, w, R)
    lo, hi = model.lower, model.upper
    best = None
    for r, a in zip(R, A):
        th0 = np.clip(_interleave(a, r), lo, hi)
        if not np.all(np.isfinite(th0)):
            continue
        th, rss, _ = kernels.lm_expsum(x, y, w, th0, lo, hi, max_iter, 1e-14)
        if np.isfinite(rss) and (best is None or rss < best[1]):
            best = (th, rss)
    if best is None:
        raise FitFailure("all exponential fits diverged")
    th = best[0]
    # canonical order: increasing rate
    order = np.argsort(th[1::2], kind="stable")
    th = _interleave(th[0::2][order], th[1::2][order])
    return FitResult(th, float(best[1]), starts_tried=len(R))


def fit_expsum_fixed(model, fixed_rates, x, y, w=None, starts=(), per_axis=None, n_best=3):
    """Fit ``model`` plus extra terms whose rates are held at ``fixed_rates``.

    Only the free rates are searched (grid scan, then bounded quasi-Newton on
    the projected residual sum); every amplitude is linear. ``theta`` lists
    the free terms first, then the fixed terms, each as (amplitude, rate).
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.ascontiguousarray(w, dtype=float)
    fixed = np.asarray(fixed_rates, dtype=float).ravel()
    k = model.n_terms
    lo, hi = model.rate_bounds

    def rows(R):
        R = np.atleast_2d(R)
        return np.hstack([R, np.broadcast_to(fixed, (R.shape[0], fixed.size))])

    def obj(r):
        v = amplitudes_for_rates(x, y, w, rows(r))[0][0]
        return v if np.isfinite(v) else 1e300

    per_axis = per_axis or (161 if k == 1 else (41 if k == 2 else 13))
    grid = _rate_scan_grid(model, k, per_axis)
    rss, _ = amplitudes_for_rates(x, y, w, rows(grid))
    rss = np.where(np.isfinite(rss), rss, np.inf)
    cands = [np.sort(np.asarray(s, dtype=float)[1::2][:k]) for s in starts]
    cands.extend(grid[np.argsort(rss, kind="stable")[:n_best]])
    best = None
    for r0 in cands:
        res = minimize(obj, np.clip(r0, lo, hi), method="L-BFGS-B", bounds=[(lo, hi)] * k)
        if best is None or res.fun < best[1]:
            best = (res.x, float(res.fun))
    if best is None or not np.isfinite(best[1]):
        raise FitFailure("fixed-rate exponential fit failed")
    rates = np.concatenate([best[0], fixed])
    _, A = amplitudes_for_rates(x, y, w, rates[None, :])
    return FitResult(_interleave(A[0], rates), best[1], starts_tried=len(cands))


def fit(rival, x, y, w=None, starts=(), **kw):
    """Weighted least squares of ``y`` on ``x`` in the family ``rival``."""
    family = family_from_basis_or_model(rival)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    if family.is_linear:
        X = family.gradient(np.zeros(family.n_params), x)
        beta, rank = weighted_lstsq(X, y, w)
        r = y - X @ beta
        return FitResult(beta, float(np.dot(w * r, r)), rank < family.n_params)
    if isinstance(family, ExpSumModel):
        return fit_expsum(family, x, y, w, starts=starts, **kw)
    raise TypeError(f"cannot fit family {type(family).__name__}")
