"""Optimal discrimination designs.

Routes:

* ``solve_t_chebyshev``: closed form when the rival basis is a Chebyshev
  system and the best-approximation residual peaks at exactly ``m + 1``
  points.
* ``enumerate_t_optimal``: every T-optimal design, as the polytope of weights
  on the extremal set that satisfy the moment conditions.
* ``solve_t_exchange`` / ``solve_kl_exchange``: first-order exchange with
  periodic weight re-optimisation and a final point polish.
* ``solve_ds``: the same scheme for the determinant-ratio criterion.
"""

from dataclasses import dataclass, field
from itertools import combinations
import math

import numpy as np
from scipy.optimize import minimize

from .approx import (
    ResidualProblem,
    best_approximation,
    discrete_minimax,
    golden_max,
    remes_exchange,
    residual_extrema,
)
from .core import Design, DesignSpace, dirac, make_design, merge_support, mix
from .criteria import _pair_matrices as _pair_info, ds_directional, t_value
from .errors import (
    CombinatorialBlowup,
    DegenerateProblem,
    EmptyPolytope,
    NoConvergence,
    NotChebyshev,
    OutOfDomain,
    ValidationError,
    WrongAlternationCount,
)
from .fitting import fit
from .models import (
    BasisSet,
    ExpSumModel,
    LinearModel,
    NestedPair,
    check_chebyshev_system,
    family_from_basis_or_model,
)

MAX_EXTREMAL = 50


@dataclass
class OptimalityReport:
    value: float
    violation: float
    support_levels: np.ndarray
    sup_error: float
    verdict: str
    tol: float
    theta: np.ndarray
    gap: float = 0.0
    best_effort: bool = False

    @property
    def optimal(self):
        return self.verdict == "optimal"

    def as_dict(self):
        return {
            "value": self.value,
            "violation": self.violation,
            "gap": self.gap,
            "sup_error": self.sup_error,
            "support_levels": np.asarray(self.support_levels).tolist(),
            "verdict": self.verdict,
            "tol": self.tol,
            "theta": np.asarray(self.theta).tolist(),
            "best_effort": self.best_effort,
        }


@dataclass
class DesignPolytope:
    support: np.ndarray
    constraint_matrix: np.ndarray
    vertices: list
    free_dimension: int
    theta_bar: np.ndarray = None
    sup_error: float = 0.0
    rank: int = 0

    def design(self, i):
        return make_design(self.support, self.vertices[i])

    def mixture(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.size != len(self.vertices) or np.any(c < 0) or abs(c.sum() - 1) > 1e-12:
            raise ValidationError("mixture coefficients must be a probability vector over vertices")
        w = np.clip(c @ np.array(self.vertices), 0.0, None)
        return make_design(self.support, w / math.fsum(w))

    def contains(self, weights, tol=1e-9):
        w = np.asarray(weights, dtype=float)
        rhs = np.zeros(self.constraint_matrix.shape[0])
        rhs[0] = 1.0
        return bool(np.all(w >= -tol) and np.allclose(self.constraint_matrix @ w, rhs, atol=tol, rtol=0))

    def as_dict(self):
        return {
            "support": self.support.tolist(),
            "constraint_matrix": self.constraint_matrix.tolist(),
            "vertices": [v.tolist() for v in self.vertices],
            "free_dimension": self.free_dimension,
            "theta_bar": None if self.theta_bar is None else np.asarray(self.theta_bar).tolist(),
            "sup_error": self.sup_error,
        }


@dataclass
class ExchangeInfo:
    iterations: int
    theta: np.ndarray
    value: float
    trace: list = field(default_factory=list)


def _sqrt_precision(precision):
    if precision is None:
        return None
    return lambda x: np.sqrt(np.maximum(precision(x), 0.0))


# --------------------------------------------------------------------------
# verification


def verify_t_optimal(design, eta, rival, space=None, tol=1e-6, precision=None, grid_n=None):
    """Equivalence check on a grid ten times finer than the design grid.

    ``optimal`` needs ``max r^2 <= value (1 + tol)`` and every support point
    at ``|r| >= sup (1 - tol)``; a failing first condition is
    ``suboptimal`` and a failing second one ``inconclusive``.
    """
    space = space or DesignSpace()
    family = family_from_basis_or_model(rival)
    cv = t_value(design, eta, family, precision=precision)
    problem = ResidualProblem(eta, family, _sqrt_precision(precision))
    n = space.grid_points if grid_n is None else int(grid_n)
    fine = space.grid(10 * (n - 1) + 1)
    vals = lambda x: problem.values(cv.minimizer, x)
    xs, vs = residual_extrema(vals, fine)
    sup = max(float(np.max(np.abs(vals(fine)))), float(np.max(np.abs(vs), initial=0.0)))
    levels = np.abs(vals(design.points))
    value = cv.value
    gap = sup * sup - value
    if value > 0:
        violation = max(gap / value, 0.0)
    else:
        violation = 0.0 if sup == 0 else math.inf
    if violation > tol:
        verdict = "suboptimal"
    elif value > 0 and np.all(levels >= sup * (1.0 - tol)):
        verdict = "optimal"
    else:
        verdict = "inconclusive"
    return OptimalityReport(
        value, violation, levels, sup, verdict, tol, cv.minimizer, gap, not family.is_linear
    )


def support_bound(rival, eta=None, route="auto", extremal=None):
    """Upper bound on the support size of a T-optimal design.

    ``route``: ``"chebyshev"`` (``m + 1``), ``"expsum"`` (sum of the term
    counts of the two exponential models) or ``"extremal"`` (size of the
    given extremal set); ``"auto"`` picks by rival type.
    """
    family = family_from_basis_or_model(rival)
    if route == "auto":
        route = "expsum" if isinstance(family, ExpSumModel) else "chebyshev"
    if route == "chebyshev":
        return family.n_params + 1
    if route == "expsum":
        truth = getattr(eta, "family", None)
        if not isinstance(truth, ExpSumModel):
            raise ValidationError("expsum bound needs an exponential-sum true model")
        return truth.n_terms + family.n_terms
    if route == "extremal":
        if extremal is None:
            raise ValidationError("extremal route needs the extremal set")
        return len(extremal)
    raise ValidationError(f"unknown route {route!r}")


def support_bound_check(design, rival, eta=None, route="auto", extremal=None):
    return design.size <= support_bound(rival, eta, route, extremal)


def modify_design(design, extra_point, mass, space=None):
    """Scale the weights by ``1 - mass`` and put ``mass`` at ``extra_point``."""
    if not 0.0 <= mass < 1.0:
        raise ValidationError("mass must lie in [0, 1)")
    space = space or DesignSpace()
    if not space.contains([extra_point]):
        raise OutOfDomain(f"{extra_point} outside [{space.lower}, {space.upper}]")
    if mass == 0.0:
        return design
    return mix(design, dirac(extra_point), mass)


# --------------------------------------------------------------------------
# closed form


def solve_t_chebyshev(eta, basis, space=None, full_output=False):
    """T-optimal design from the Chebyshev points of the best approximation.

    Weights are ``|u_i| / sum |u_j|`` with ``u`` the least-squares solution of
    ``X u = e_last``, where ``X`` holds the basis functions and ``eta``
    (rows) at the ``m + 1`` extremal points (columns).
    """
    space = space or DesignSpace()
    if not check_chebyshev_system(basis, space):
        raise NotChebyshev("rival basis fails the sampled Chebyshev-system test")
    ba = remes_exchange(eta, basis, space, check_basis=False)
    if ba.degenerate:
        raise DegenerateProblem("eta lies in the span of the rival basis")
    A = ba.extremal_points
    m = basis.m
    if A.size != m + 1:
        raise WrongAlternationCount(f"extremal set has {A.size} points, expected {m + 1}", ba)
    X = np.vstack([basis.evaluate(A).T, eta(A)[None, :]])
    e = np.zeros(m + 1)
    e[-1] = 1.0
    u = np.linalg.lstsq(X, e, rcond=None)[0]
    w = np.abs(u) / np.sum(np.abs(u))
    design = make_design(A, w)
    if full_output:
        extended = check_chebyshev_system(basis.extend(eta, labels=("eta",)), space)
        return design, {"best_approx": ba, "u": u, "extended_chebyshev": extended}
    return design


# --------------------------------------------------------------------------
# polytope of all T-optimal designs


def _basic_solutions(C, b, tol=1e-10):
    rows, n = C.shape
    found = []
    for cols in combinations(range(n), rows):
        B = C[:, cols]
        if abs(np.linalg.det(B)) < tol * max(1.0, np.max(np.abs(B))) ** rows:
            continue
        wb = np.linalg.solve(B, b)
        if np.min(wb) < -1e-10:
            continue
        w = np.zeros(n)
        w[list(cols)] = np.clip(wb, 0.0, None)
        w /= w.sum()
        if not any(np.allclose(w, v, atol=1e-10, rtol=0) for v in found):
            found.append(w)
    return found


def enumerate_t_optimal(eta, rival, space=None, precision=None, extremal_tol=1e-6, **approx_opts):
    """Vertices of the set of T-optimal (or KL-optimal) weight vectors.

    Support is the extremal set of the best approximation; the constraints
    are total mass one and orthogonality of the residual to every gradient
    direction of the rival.
    """
    space = space or DesignSpace()
    family = family_from_basis_or_model(rival)
    scale = _sqrt_precision(precision)
    ba = best_approximation(eta, family, space, scale=scale, extremal_tol=extremal_tol, **approx_opts)
    if ba.degenerate:
        raise DegenerateProblem("eta lies in the rival family")
    A = ba.extremal_points
    if A.size > MAX_EXTREMAL:
        raise CombinatorialBlowup(f"extremal set has {A.size} points (cap {MAX_EXTREMAL})")
    problem = ResidualProblem(eta, family, scale)
    r = problem.values(ba.theta_bar, A)
    G = -problem.jacobian(ba.theta_bar, A)
    C = np.vstack([np.ones(A.size), (r[:, None] * G).T])
    b = np.zeros(C.shape[0])
    b[0] = 1.0
    # independent rows (rank-revealing SVD), each scaled to unit size
    U, sv, _ = np.linalg.svd(C / np.max(np.abs(C), axis=1, keepdims=True).clip(1e-300))
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    Cs = C / np.max(np.abs(C), axis=1, keepdims=True).clip(1e-300)
    bs = b / np.max(np.abs(C), axis=1).clip(1e-300)
    Cr = U[:, :rank].T @ Cs
    br = U[:, :rank].T @ bs
    vertices = _basic_solutions(Cr, br)
    vertices = [v for v in vertices if np.allclose(C @ v, b, atol=1e-9, rtol=0)]
    if not vertices:
        raise EmptyPolytope("no nonnegative weights satisfy the moment conditions", ba)
    vertices.sort(key=lambda v: tuple(-v))
    return DesignPolytope(A, C, vertices, int(A.size - rank), ba.theta_bar, ba.sup_error, rank)


# --------------------------------------------------------------------------
# exchange algorithms


def _inner_fit(family, x, y, w, theta):
    starts = () if theta is None or family.is_linear else (theta,)
    return fit(family, x, y, w, starts=starts).theta


def _reweight(problem, design, theta, drop=1e-9):
    th, level, w = discrete_minimax(problem, design.points, theta)
    keep = w > drop
    if not np.any(keep):
        return design, th, level
    return make_design(design.points[keep], w[keep] / math.fsum(w[keep])), th, level


def _polish_points(values, design, space, h, rounds=6):
    pts = design.points
    sg = np.sign(values(pts))
    sg[sg == 0] = 1.0
    a = np.clip(pts - 2 * h, space.lower, space.upper)
    b = np.clip(pts + 2 * h, space.lower, space.upper)
    new = golden_max(lambda x: sg * values(x), a, b)
    for edge in (space.lower, space.upper):
        near = np.abs(pts - edge) <= 2 * h
        if np.any(near):
            better = sg * values(np.full(pts.shape, edge)) >= sg * values(new)
            new = np.where(near & better, edge, new)
    new = np.where(sg * values(new) >= sg * values(pts), new, pts)
    return new


def solve_t_exchange(
    eta,
    rival,
    space=None,
    precision=None,
    grid_n=None,
    max_iter=3000,
    tol=1e-3,
    reopt_every=25,
    polish_rounds=8,
    full_output=False,
):
    """First-order exchange for the T (or, with ``precision``, KL) criterion.

    Each step moves mass ``1/(k+1)`` to the grid maximiser of the squared
    residual. Every ``reopt_every`` steps the support is merged and the
    weights re-optimised exactly (discrete minimax with dual weights). After
    convergence the support points are moved to the local maxima of the
    residual and the weights re-optimised again.
    """
    space = space or DesignSpace()
    family = family_from_basis_or_model(rival)
    scale = _sqrt_precision(precision)
    problem = ResidualProblem(eta, family, scale)
    grid = space.grid(grid_n)
    h = grid[1] - grid[0]
    lam = (lambda x: np.ones_like(x)) if precision is None else precision
    k0 = max(family.n_params + 1, 3)
    if scale is None:
        x0 = np.linspace(space.lower, space.upper, k0)
    else:
        x0 = np.linspace(space.lower, space.upper, k0 + 2)[1:-1]
    design = make_design(x0, np.full(x0.size, 1.0 / x0.size))
    theta = None
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        x, w = design.points, design.weights * lam(design.points)
        theta = _inner_fit(family, x, eta(x), w, theta)
        rg = problem.values(theta, grid)
        r2 = rg * rg
        j = int(np.argmax(r2))
        value = math.fsum((w * (eta(x) - family.mean(theta, x)) ** 2).tolist())
        trace.append((it, value, float(r2[j])))
        if r2[j] < 1e-24 and value < 1e-24:
            raise DegenerateProblem("criterion vanishes: the rival family contains eta")
        if r2[j] <= value * (1.0 + tol):
            converged = True
            break
        design = mix(design, dirac(grid[j]), 1.0 / (it + 1))
        if it % reopt_every == 0:
            design, theta, _ = _reweight(problem, merge_support(design, 2.5 * h), theta)
    design = merge_support(design, 2.5 * h)
    design, theta, level = _reweight(problem, design, theta)
    for _ in range(polish_rounds):
        vals = lambda z, th=theta: problem.values(th, z)
        moved = make_design(_polish_points(vals, design, space, h), design.weights)
        moved = merge_support(moved, 1e-7)
        design, theta, level = _reweight(problem, moved, theta)
    rep = verify_t_optimal(design, eta, family, space, tol=max(tol, 1e-6), precision=precision, grid_n=grid_n)
    if not converged and rep.verdict == "suboptimal":
        raise NoConvergence(f"exchange did not converge in {max_iter} iterations", (design, rep))
    if full_output:
        return design, ExchangeInfo(it, theta, level * level, trace)
    return design


def solve_kl_exchange(obs_true, rival, space=None, **opts):
    """KL-optimal design for Gaussian observations with shared precision."""
    return solve_t_exchange(obs_true.mean, rival, space, precision=obs_true.precision, **opts)


# --------------------------------------------------------------------------
# D_s


def _combined_pair(pair):
    """Reduced model plus the single function ``theta0^T g``."""
    if not isinstance(pair.full, LinearModel):
        raise ValidationError("s = 1 against a combined extension needs a linear full model")
    fns = pair.full.basis.functions
    red = list(pair.reduced_indices)
    ext = list(pair.extension)
    t0 = pair.theta0

    def phi(x):
        return sum(c * np.broadcast_to(fns[i](x), np.shape(x)) for c, i in zip(t0, ext))

    basis = BasisSet(tuple(fns[i] for i in red) + (phi,), "custom-list")
    theta = np.concatenate([pair.theta[red], [1.0]])
    return NestedPair(LinearModel(basis), theta, (len(red),))


def _ds_reweight(pair, design, s, drop=1e-8):
    """Maximise the log determinant ratio over weights on a fixed support.

    The criterion is concave in the weights and its gradient is the
    directional derivative at the support points, so SLSQP converges fast.
    """
    x = design.points

    def neg(w):
        wd = Design(x, np.clip(w, 1e-300, None))
        M1, M2, _, _ = _pair_info(wd, pair)
        s1, l1 = np.linalg.slogdet(M1)
        s2, l2 = np.linalg.slogdet(M2)
        if s1 <= 0 or s2 <= 0:
            return 1e10, np.zeros_like(w)
        return -(l1 - l2), -ds_directional(wd, pair, x)

    res = minimize(
        neg,
        design.weights,
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * x.size,
        constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0, "jac": lambda w: np.ones_like(w)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    w = np.clip(res.x, 0.0, None) if np.all(np.isfinite(res.x)) else design.weights.copy()
    keep = w > drop
    return make_design(x[keep], w[keep] / math.fsum(w[keep]))


def _ds_joint(pair, design, space, drop=1e-8):
    """Joint maximisation over support points and weights (final polish)."""
    k = design.size
    red = list(pair.reduced_indices)

    def unpack(z):
        return z[:k], np.clip(z[k:], 1e-300, None)

    def neg(z):
        x, w = unpack(z)
        G = pair.gradients(x)
        M1 = (G * w[:, None]).T @ G
        M2 = M1[np.ix_(red, red)]
        s1, l1 = np.linalg.slogdet(M1)
        s2, l2 = np.linalg.slogdet(M2)
        if s1 <= 0 or s2 <= 0:
            return 1e10, np.zeros_like(z)
        A1 = np.linalg.solve(M1, G.T).T
        A2 = np.linalg.solve(M2, G[:, red].T).T
        d = np.einsum("ij,ij->i", G, A1) - np.einsum("ij,ij->i", G[:, red], A2)
        eps = 1e-6 * max(1.0, space.width)
        dG = (pair.gradients(x + eps) - pair.gradients(x - eps)) / (2 * eps)
        dd = 2 * np.einsum("ij,ij->i", dG, A1) - 2 * np.einsum("ij,ij->i", dG[:, red], A2)
        return -(l1 - l2), -np.concatenate([w * dd, d])

    res = minimize(
        neg,
        np.concatenate([design.points, design.weights]),
        jac=True,
        method="SLSQP",
        bounds=[(space.lower, space.upper)] * k + [(0.0, 1.0)] * k,
        constraints=[
            {
                "type": "eq",
                "fun": lambda z: np.sum(z[k:]) - 1.0,
                "jac": lambda z: np.concatenate([np.zeros(k), np.ones(k)]),
            }
        ],
        options={"ftol": 1e-16, "maxiter": 1000},
    )
    if not np.all(np.isfinite(res.x)) or neg(res.x)[0] > neg(np.concatenate([design.points, design.weights]))[0]:
        return design
    x, w = res.x[:k], np.clip(res.x[k:], 0.0, None)
    keep = w > drop
    return merge_support(make_design(x[keep], w[keep] / math.fsum(w[keep]), space), 1e-7)


def solve_ds(pair, space=None, s=None, grid_n=None, max_iter=3000, tol=1e-6, reopt_every=25, polish_rounds=3):
    """D_s-optimal design for a nested pair (local at ``pair.theta``).

    ``s`` defaults to the number of extension coordinates; ``s = 1`` with
    several linear extension coordinates targets the single combined
    function ``theta0^T g``.
    """
    space = space or DesignSpace()
    if s is None:
        s = pair.m0
    if s != pair.m0:
        if s == 1:
            pair = _combined_pair(pair)
        else:
            raise ValidationError(f"s = {s} does not match {pair.m0} extension coordinates")
    grid = space.grid(grid_n)
    h = grid[1] - grid[0]
    x0 = np.linspace(space.lower, space.upper, 2 * pair.m1)
    design = make_design(x0, np.full(x0.size, 1.0 / x0.size))
    for it in range(1, max_iter + 1):
        d = ds_directional(design, pair, grid)
        j = int(np.argmax(d))
        if d[j] <= s * (1.0 + 1e-3):
            break
        design = mix(design, dirac(grid[j]), 1.0 / (it + 1))
        if it % reopt_every == 0:
            design = _ds_reweight(pair, merge_support(design, 2.5 * h), s)
    design = _ds_reweight(pair, merge_support(design, 2.5 * h), s)
    for _ in range(polish_rounds):
        design = _ds_reweight(pair, _ds_joint(pair, design, space), s)
    fine = space.grid(10 * (grid.size - 1) + 1)
    worst = float(np.max(ds_directional(design, pair, fine)))
    if worst - s > s * max(tol, 1e-6) * 10:
        raise NoConvergence(f"D_s equivalence bound violated: max d = {worst:.6g} > s = {s}", design)
    return design


def ds_equivalence_gap(design, pair, space=None, s=None, grid_n=None):
    """``max_x d(x, design) - s`` on a fine grid."""
    space = space or DesignSpace()
    s = pair.m0 if s is None else s
    n = space.grid_points if grid_n is None else grid_n
    fine = space.grid(10 * (n - 1) + 1)
    return float(np.max(ds_directional(design, pair, fine))) - s
