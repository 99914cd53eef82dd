"""Best uniform approximation on an interval.

All routines minimise ``sup_x |s(x) (eta(x) - eta2(x, theta))|`` over
``theta``, where ``s`` is an optional nonnegative scale (``None`` means
``s = 1``). A scale equal to the square root of an observation precision
turns the squared residual into the Gaussian KL distance.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math
import warnings

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from . import kernels
from .core import DesignSpace
from .errors import NoConvergence, NotChebyshev
from .fitting import fit_expsum, halton_rates
from .models import ExpSumModel, LinearModel, check_chebyshev_system, family_from_basis_or_model

DEGENERATE_SUP = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class DegenerateResidualWarning(UserWarning):
    """The residual vanishes identically, so there is no extremal set."""


@dataclass
class RemesStep:
    iteration: int
    theta: np.ndarray
    reference: np.ndarray
    level: float
    sup_error: float
    extrema: np.ndarray


@dataclass
class BestApprox:
    theta_bar: np.ndarray
    sup_error: float
    extremal_points: np.ndarray
    residual_signs: np.ndarray
    iterations: int
    reference: np.ndarray = None
    alternation: int = 0
    degenerate: bool = False
    lower_bound: float = None
    history: list = field(default_factory=list)


class ResidualProblem:
    """``s(x) * (target(x) - family.mean(theta, x))`` and its theta-Jacobian."""

    def __init__(self, target, family, scale=None):
        self.target = target
        self.family = family_from_basis_or_model(family)
        self.scale = scale

    def _s(self, x):
        if self.scale is None:
            return None
        return np.asarray(self.scale(x), dtype=float)

    def values(self, theta, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        r = self.target(x) - self.family.mean(theta, x)
        s = self._s(x)
        return r if s is None else s * r

    def jacobian(self, theta, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        J = -self.family.gradient(theta, x)
        s = self._s(x)
        return J if s is None else J * s[:, None]

    def scaled_target(self, x):
        y = self.target(x)
        s = self._s(x)
        return y if s is None else s * y

    def scaled_basis(self, x):
        F = self.family.gradient(np.zeros(self.family.n_params), x)
        s = self._s(x)
        return F if s is None else F * s[:, None]


# --------------------------------------------------------------------------
# extrema of a residual


def golden_max(f, a, b, iters=64):
    """Vectorised golden-section maximisation of ``f`` on brackets ``[a, b]``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    for _ in range(iters):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        if np.all(b - a <= 1e-13 * (1.0 + np.abs(a))):
            break
    return 0.5 * (a + b)


def residual_extrema(values, grid):
    """Local maximisers of ``|values(x)|`` seeded on ``grid`` and polished.

    Returns ``(points, residuals)`` sorted by location.
    """
    v = values(grid)
    idx = kernels.local_extrema(np.ascontiguousarray(v))
    if idx.size == 0:
        return np.zeros(0), np.zeros(0)
    n = grid.size
    sg = np.sign(v[idx])
    a = grid[np.maximum(idx - 1, 0)]
    b = grid[np.minimum(idx + 1, n - 1)]
    xs = golden_max(lambda x: sg * values(x), a, b)
    vs = values(xs)
    grid_better = sg * v[idx] >= sg * vs
    xs = np.where(grid_better, grid[idx], xs)
    vs = np.where(grid_better, v[idx], vs)
    order = np.argsort(xs, kind="stable")
    xs, vs = xs[order], vs[order]
    keep = np.ones(xs.size, dtype=bool)
    for i in range(1, xs.size):
        if xs[i] - xs[i - 1] < 1e-9 and np.sign(vs[i]) == np.sign(vs[i - 1]):
            if abs(vs[i]) > abs(vs[i - 1]):
                keep[i - 1] = False
            else:
                keep[i] = False
    return xs[keep], vs[keep]


def alternating_subset(xs, vs, threshold=0.0):
    """Compress runs of equal sign (keeping the largest) among ``|v| >= threshold``."""
    mask = np.abs(vs) >= threshold
    xs, vs = xs[mask], vs[mask]
    out_x, out_v = [], []
    for x, v in zip(xs, vs):
        if out_v and np.sign(v) == np.sign(out_v[-1]):
            if abs(v) > abs(out_v[-1]):
                out_x[-1], out_v[-1] = x, v
        else:
            out_x.append(x)
            out_v.append(v)
    return np.array(out_x), np.array(out_v)


def _best_window(ax, av, k):
    """``k`` consecutive alternating points containing the global max."""
    j = int(np.argmax(np.abs(av)))
    best, best_min = None, -1.0
    for start in range(max(0, j - k + 1), min(j, ax.size - k) + 1):
        mn = float(np.min(np.abs(av[start : start + k])))
        if mn > best_min:
            best, best_min = start, mn
    return ax[best : best + k]


def _extremal_from(xs, vs, sup, tol):
    sel = np.abs(vs) >= sup * (1.0 - tol)
    return xs[sel], np.sign(vs[sel]).astype(int)


def _count_alternation(xs, vs, sup, tol):
    ax, _ = alternating_subset(xs, vs, sup * (1.0 - tol))
    return int(ax.size)


def _degenerate(theta, iterations, history=None):
    warnings.warn("residual vanishes; extremal set is empty", DegenerateResidualWarning, stacklevel=3)
    return BestApprox(
        np.asarray(theta, dtype=float),
        0.0,
        np.zeros(0),
        np.zeros(0, dtype=int),
        iterations,
        degenerate=True,
        history=history or [],
    )


# --------------------------------------------------------------------------
# linear programs


def _lp_minimax(F, y, bounds=None):
    """``min_c max_i |y_i - (F c)_i|``; returns ``(c, level, dual weights)``."""
    n, m = F.shape
    ones = np.ones((n, 1))
    A = np.vstack([np.hstack([-F, -ones]), np.hstack([F, -ones])])
    b = np.concatenate([-y, y])
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    if bounds is None:
        bounds = [(None, None)] * m
    res = linprog(cost, A_ub=A, b_ub=b, bounds=list(bounds) + [(0, None)], method="highs")
    if res.status != 0:
        raise NoConvergence(f"minimax linear program failed: {res.message}")
    mu = -np.asarray(res.ineqlin.marginals)
    w = np.maximum(mu[:n] + mu[n:], 0.0)
    s = w.sum()
    if s > 0:
        w = w / s
    return res.x[:m], float(res.x[-1]), w


def discrete_minimax(problem, points, theta0, max_iter=200, tol=1e-14):
    """Minimax of the residual over a finite point set.

    Linear families are solved by a single linear program; nonlinear ones by
    sequential linear programming with a trust region. Returns
    ``(theta, level, weights)`` where ``weights`` are the optimal dual
    multipliers (a probability vector over ``points``).
    """
    pts = np.asarray(points, dtype=float)
    fam = problem.family
    if fam.is_linear:
        F = problem.scaled_basis(pts)
        c, level, w = _lp_minimax(F, problem.scaled_target(pts))
        return c, float(np.max(np.abs(problem.values(c, pts)))), w
    theta = np.clip(np.asarray(theta0, dtype=float), fam.lower, fam.upper)
    radius = 0.5 * (1.0 + np.max(np.abs(theta)))
    r = problem.values(theta, pts)
    level = float(np.max(np.abs(r)))
    for _ in range(max_iter):
        J = problem.jacobian(theta, pts)
        bounds = [
            (max(-radius, lo - t), min(radius, hi - t))
            for t, lo, hi in zip(theta, fam.lower, fam.upper)
        ]
        d, pred_level, _ = _lp_minimax(-J, r, bounds)
        pred = level - pred_level
        if pred <= tol * max(level, 1e-300):
            break
        cand = theta + d
        rc = problem.values(cand, pts)
        lc = float(np.max(np.abs(rc)))
        ratio = (level - lc) / pred
        if ratio > 0.01:
            theta, r, level = cand, rc, lc
            if ratio > 0.75:
                radius *= 2.0
        else:
            radius *= 0.25
        if radius < 1e-14 * (1.0 + np.max(np.abs(theta))):
            break
    # Weights are the duals of the linearised problem at the final theta
    # without the trust region, which would otherwise bias them whenever it
    # is active.
    J = problem.jacobian(theta, pts)
    box = [(lo - t, hi - t) for t, lo, hi in zip(theta, fam.lower, fam.upper)]
    _, _, w = _lp_minimax(-J, r, box)
    return theta, level, w


# --------------------------------------------------------------------------
# Remes exchange for Chebyshev systems


def chebyshev_reference(space, k, interior=False):
    """Chebyshev extrema (or, with ``interior``, zeros) mapped to ``space``."""
    j = np.arange(k)
    mid, half = 0.5 * (space.lower + space.upper), 0.5 * space.width
    if interior:
        return mid - half * np.cos(np.pi * (2 * j + 1) / (2 * k))
    x = mid - half * np.cos(np.pi * j / (k - 1))
    x[0], x[-1] = space.lower, space.upper
    return x


def _levelled(problem, ref, m):
    """Levelled solution on ``ref``; references larger than ``m+1`` take the
    subset with the largest level."""
    F = problem.scaled_basis(ref)
    y = problem.scaled_target(ref)
    best = None
    for sub in combinations(range(ref.size), m + 1):
        sub = list(sub)
        A = np.hstack([F[sub], ((-1.0) ** np.arange(m + 1))[:, None]])
        try:
            sol = np.linalg.solve(A, y[sub])
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(sol)):
            continue
        if best is None or abs(sol[-1]) > abs(best[1]):
            best = (sol[:-1], sol[-1], ref[sub])
    if best is None:
        raise NoConvergence("reference set admits no levelled solution")
    return best


def remes_exchange(
    target,
    basis,
    space=None,
    tol=1e-10,
    max_iter=50,
    scale=None,
    initial_reference=None,
    grid_points=None,
    extremal_tol=1e-6,
    check_basis=True,
):
    """Remes multiple exchange for a Chebyshev system ``basis``.

    Each step solves the levelled equations on ``m + 1`` reference points
    and exchanges them for alternating extrema of the new residual that
    include its global maximum. ``history`` records every step.
    """
    space = space or DesignSpace()
    if tol <= 0:
        raise ValueError("tol must be positive")
    if check_basis and not check_chebyshev_system(basis, space):
        raise NotChebyshev("basis fails the sampled Chebyshev-system test")
    problem = ResidualProblem(target, LinearModel(basis), scale)
    m = basis.m
    grid = space.grid(grid_points)
    if initial_reference is None:
        # a scale may vanish at the endpoints; start inside then
        ref = chebyshev_reference(space, m + 1, interior=scale is not None)
    else:
        ref = np.sort(np.asarray(initial_reference, dtype=float))
    history = []
    for it in range(1, max_iter + 1):
        theta, E, used = _levelled(problem, ref, m)
        level = abs(E)
        xs, vs = residual_extrema(lambda x: problem.values(theta, x), grid)
        sup = float(np.max(np.abs(vs))) if vs.size else 0.0
        ax, av = alternating_subset(xs, vs, level * (1.0 - 1e-9))
        history.append(RemesStep(it, theta.copy(), ref.copy(), level, sup, ax.copy()))
        if sup < DEGENERATE_SUP:
            return _degenerate(theta, it, history)
        if sup - level <= tol * sup:
            pts, sg = _extremal_from(xs, vs, sup, extremal_tol)
            return BestApprox(
                theta,
                sup,
                pts,
                sg,
                it,
                reference=used,
                alternation=_count_alternation(xs, vs, sup, extremal_tol),
                history=history,
            )
        if ax.size >= m + 1:
            ref = _best_window(ax, av, m + 1)
        else:
            xstar = xs[int(np.argmax(np.abs(vs)))]
            ref = np.union1d(ref, [xstar])
    raise NoConvergence(f"Remes exchange did not converge in {max_iter} iterations", history)


# --------------------------------------------------------------------------
# grid oracle


def grid_minimax(target, family, space=None, grid_n=4001, theta_box=None, scale=None, per_axis=None):
    """Brute-force minimax over ``grid_n`` equispaced points.

    Linear families: one linear program. Exponential sums: the amplitudes are
    linear, so each rate vector is scored by a linear program and the rates
    are refined coordinate-wise from the best points of a rate grid.
    ``sup_error`` is measured on a grid ten times finer, so it bounds the
    continuous minimax value from above; ``lower_bound`` is the discrete
    optimum.
    """
    space = space or DesignSpace()
    if grid_n < 1001:
        raise ValueError("grid_n must be at least 1001")
    family = family_from_basis_or_model(family)
    problem = ResidualProblem(target, family, scale)
    x = space.grid(grid_n)
    y = problem.scaled_target(x)
    if family.is_linear:
        theta, lower, _ = _lp_minimax(problem.scaled_basis(x), y)
    elif isinstance(family, ExpSumModel):
        theta, lower = _grid_minimax_expsum(problem, family, x, y, theta_box, per_axis)
    else:
        raise TypeError(f"unsupported family {type(family).__name__}")
    fine = space.grid(10 * (grid_n - 1) + 1)
    xs, vs = residual_extrema(lambda z: problem.values(theta, z), fine)
    sup = max(float(np.max(np.abs(problem.values(theta, fine)))), float(np.max(np.abs(vs), initial=0.0)))
    if sup < DEGENERATE_SUP:
        out = _degenerate(theta, 1)
        out.lower_bound = lower
        return out
    pts, sg = _extremal_from(xs, vs, sup, 1e-3)
    return BestApprox(
        theta, sup, pts, sg, 1, alternation=_count_alternation(xs, vs, sup, 1e-3), lower_bound=lower
    )


def _grid_minimax_expsum(problem, family, x, y, theta_box, per_axis):
    lo, hi = family.rate_bounds if theta_box is None else theta_box
    k = family.n_terms
    s = problem._s(x)

    def basis_at(rates):
        E = np.exp(-np.outer(x, rates))
        return E if s is None else E * s[:, None]

    def score(rates):
        try:
            _, level, _ = _lp_minimax(basis_at(rates), y)
        except NoConvergence:
            return np.inf
        return level

    per_axis = per_axis or (201 if k == 1 else 31)
    axis = np.linspace(lo, hi, per_axis)
    cands = axis[:, None] if k == 1 else np.array(list(combinations(axis, k)))
    scores = np.array([score(r) for r in cands])
    order = np.argsort(scores, kind="stable")[:3]
    step = (hi - lo) / (per_axis - 1)
    best_r, best_s = None, np.inf
    for r in cands[order]:
        r = r.copy()
        cur = score(r)
        for _ in range(3 if k > 1 else 1):
            for j in range(k):

                def f1(t, j=j, r=r):
                    rr = r.copy()
                    rr[j] = t
                    return score(rr)

                a, b = max(lo, r[j] - step), min(hi, r[j] + step)
                res = minimize_scalar(f1, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
                if res.fun < cur:
                    r[j], cur = res.x, res.fun
        if cur < best_s:
            best_r, best_s = r, cur
    amps, level, _ = _lp_minimax(basis_at(best_r), y)
    theta = np.empty(2 * k)
    theta[0::2], theta[1::2] = amps, best_r
    return theta, level


# --------------------------------------------------------------------------
# nonlinear families


def _polish_minimax(problem, theta, grid, k, tol, max_iter):
    ref = None
    level = 0.0
    for it in range(1, max_iter + 1):
        xs, vs = residual_extrema(lambda x: problem.values(theta, x), grid)
        sup = float(np.max(np.abs(vs))) if vs.size else 0.0
        if sup < DEGENERATE_SUP:
            return theta, sup, xs, vs, it, True
        if ref is not None and sup - level <= tol * sup:
            return theta, sup, xs, vs, it, True
        ax, av = alternating_subset(xs, vs)
        if ax.size >= k:
            ref = _best_window(ax, av, k)
        else:
            xstar = xs[int(np.argmax(np.abs(vs)))]
            base = ax if ref is None else ref
            ref = np.union1d(base, [xstar])
        theta, level, _ = discrete_minimax(problem, ref, theta)
    return theta, sup, xs, vs, max_iter, False


def nonlinear_best_approx(
    target,
    family,
    space=None,
    starts=8,
    tol=1e-10,
    max_iter=60,
    scale=None,
    grid_points=None,
    extremal_tol=1e-6,
):
    """Best uniform approximation by an exponential sum, from several starts.

    Each start is a least-squares fit on a coarse grid followed by a
    Remes-type exchange on ``n_params + 1`` alternating points (or a growing
    reference while fewer alternate). The best converged start wins.
    """
    space = space or DesignSpace()
    if starts < 8:
        raise ValueError("need at least 8 starts")
    family = family_from_basis_or_model(family)
    if not isinstance(family, ExpSumModel):
        raise TypeError("nonlinear_best_approx expects an exponential-sum family")
    problem = ResidualProblem(target, family, scale)
    coarse = space.grid(201)
    yc = target(coarse)
    wc = np.ones_like(coarse) if scale is None else np.asarray(scale(coarse), dtype=float) ** 2
    grid = space.grid(grid_points)
    k = family.n_params + 1

    # deterministic starts: best rate-grid points plus a low-discrepancy set
    seeds = []
    rs_scan = fit_expsum(family, coarse, yc, wc, scan=True, n_best=starts // 2)
    seeds.append(rs_scan.theta)
    for r in halton_rates(family, starts - 1):
        th = np.empty(family.n_params)
        th[0::2], th[1::2] = 0.0, r
        seeds.append(th)
    best = None
    history = []
    for th0 in seeds:
        try:
            if th0 is rs_scan.theta:
                th_ls = th0
            else:
                th_ls = fit_expsum(family, coarse, yc, wc, starts=[th0], scan=False).theta
            theta, sup, xs, vs, its, ok = _polish_minimax(problem, th_ls, grid, k, tol, max_iter)
        except (NoConvergence, np.linalg.LinAlgError):
            continue
        history.append((theta.copy(), sup, ok))
        if ok and (best is None or sup < best[1]):
            best = (theta, sup, xs, vs, its)
    if best is None:
        raise NoConvergence("no start converged", history)
    theta, sup, xs, vs, its = best
    if sup < DEGENERATE_SUP:
        return _degenerate(theta, its, history)
    pts, sg = _extremal_from(xs, vs, sup, extremal_tol)
    return BestApprox(
        theta,
        sup,
        pts,
        sg,
        its,
        alternation=_count_alternation(xs, vs, sup, extremal_tol),
        history=history,
    )


def best_approximation(target, family, space=None, scale=None, **kw):
    """Dispatch: Remes for linear Chebyshev bases, SLP exchange otherwise.

    Linear bases that fail the Chebyshev test fall back to the exact
    discrete minimax on the design grid followed by point refinement.
    """
    space = space or DesignSpace()
    family = family_from_basis_or_model(family)
    if family.is_linear:
        if check_chebyshev_system(family.basis, space):
            return remes_exchange(target, family.basis, space, scale=scale, check_basis=False, **kw)
        problem = ResidualProblem(target, family, scale)
        grid = space.grid(kw.get("grid_points"))
        theta, _, _ = discrete_minimax(problem, grid, np.zeros(family.n_params))
        theta, sup, xs, vs, its, _ = _polish_minimax(
            problem, theta, grid, family.n_params + 1, kw.get("tol", 1e-10), kw.get("max_iter", 50)
        )
        if sup < DEGENERATE_SUP:
            return _degenerate(theta, its)
        pts, sg = _extremal_from(xs, vs, sup, 1e-6)
        return BestApprox(theta, sup, pts, sg, its, alternation=_count_alternation(xs, vs, sup, 1e-6))
    return nonlinear_best_approx(target, family, space, scale=scale, **kw)


def extremal_set(target, family, theta_bar, space=None, tol=1e-6, scale=None, grid_points=None):
    """Local maximisers of ``|residual|`` within relative ``tol`` of its sup."""
    space = space or DesignSpace()
    problem = ResidualProblem(target, family, scale)
    xs, vs = residual_extrema(lambda x: problem.values(theta_bar, x), space.grid(grid_points))
    sup = float(np.max(np.abs(vs))) if vs.size else 0.0
    if sup < DEGENERATE_SUP:
        warnings.warn("residual vanishes; extremal set is empty", DegenerateResidualWarning, stacklevel=2)
        return np.zeros(0)
    return _extremal_from(xs, vs, sup, tol)[0]
