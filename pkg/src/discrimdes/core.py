"""Design measures on an interval, exact-design rounding and dense linear algebra."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import BadWeights, OutOfDomain, TooFewRuns

POINT_TOL = 1e-9
WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class DesignSpace:
    """Closed interval ``[lower, upper]`` with a default search grid size."""

    lower: float = -1.0
    upper: float = 1.0
    grid_points: int = 2001

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise OutOfDomain("design space bounds must be finite")
        if not self.lower < self.upper:
            raise OutOfDomain(f"need lower < upper, got [{self.lower}, {self.upper}]")
        if int(self.grid_points) < 101:
            raise OutOfDomain("grid_points must be at least 101")
        object.__setattr__(self, "grid_points", int(self.grid_points))

    @property
    def width(self):
        return self.upper - self.lower

    def grid(self, n=None):
        n = self.grid_points if n is None else int(n)
        g = np.linspace(self.lower, self.upper, n)
        g[0], g[-1] = self.lower, self.upper
        return g

    def contains(self, x, slack=1e-12):
        x = np.asarray(x, dtype=float)
        s = slack * max(1.0, self.width)
        return bool(np.all((x >= self.lower - s) & (x <= self.upper + s)))


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Design:
    """Approximate design: support points (strictly increasing) and weights."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        object.__setattr__(self, "weights", _frozen(self.weights))

    @property
    def size(self):
        return len(self.points)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(zip(self.points.tolist(), self.weights.tolist()))

    def allclose(self, other, point_tol=POINT_TOL, weight_tol=WEIGHT_TOL):
        return (
            self.size == other.size
            and np.allclose(self.points, other.points, rtol=0, atol=point_tol)
            and np.allclose(self.weights, other.weights, rtol=0, atol=weight_tol)
        )

    def as_dict(self):
        return {"points": self.points.tolist(), "weights": self.weights.tolist()}

    def __repr__(self):
        pts = ", ".join(f"{p:.6g}" for p in self.points)
        wts = ", ".join(f"{w:.6g}" for w in self.weights)
        return f"Design(points=[{pts}], weights=[{wts}])"


@dataclass(frozen=True, eq=False)
class ExactDesign:
    points: np.ndarray
    counts: np.ndarray
    n: int

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(self.points))
        c = np.array(self.counts, dtype=np.int64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if int(c.sum()) != int(self.n):
            raise TooFewRuns(f"counts sum to {int(c.sum())}, expected {self.n}")

    def expand(self):
        """One entry per run, in support order."""
        return np.repeat(self.points, self.counts)


def _normalize(w):
    # Leaves exactly-normalised input untouched so that make_design is
    # bit-for-bit idempotent; otherwise rescale and push the rounding
    # residue into the largest weight.
    if math.fsum(w) == 1.0:
        return w
    w = w / math.fsum(w)
    j = int(np.argmax(w))
    for _ in range(4):
        s = math.fsum(w)
        if s == 1.0:
            break
        w[j] += 1.0 - s
    return w


def make_design(points, weights, space=None):
    """Validate and canonicalise a design.

    Points are sorted, zero-weight atoms dropped and exact duplicates merged.
    """
    x = np.atleast_1d(np.asarray(points, dtype=float)).ravel()
    w = np.atleast_1d(np.asarray(weights, dtype=float)).ravel()
    if x.shape != w.shape:
        raise BadWeights(f"{x.size} points but {w.size} weights")
    if x.size == 0:
        raise BadWeights("empty design")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise BadWeights("non-finite point or weight")
    if np.any(w < 0):
        raise BadWeights("negative weight")
    total = math.fsum(w)
    if abs(total - 1.0) > 1e-9:
        raise BadWeights(f"weights sum to {total!r}, not 1")
    if space is not None and not space.contains(x):
        bad = x[(x < space.lower) | (x > space.upper)]
        raise OutOfDomain(f"points {bad.tolist()} outside [{space.lower}, {space.upper}]")
    if space is not None:
        x = np.clip(x, space.lower, space.upper)
    keep = w > 0
    x, w = x[keep], w[keep]
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    if np.any(np.diff(x) == 0):
        ux, inv = np.unique(x, return_inverse=True)
        uw = np.zeros(ux.size)
        np.add.at(uw, inv, w)
        x, w = ux, uw
    return Design(x, _normalize(w.copy()))


def round_design(design, n):
    """Largest-remainder apportionment of ``n`` runs.

    Ties in the remainders go to the smaller support index.
    """
    n = int(n)
    k = design.size
    if n < k:
        raise TooFewRuns(f"{n} runs cannot cover {k} support points")
    quota = n * design.weights
    counts = np.floor(quota + 1e-12).astype(np.int64)
    counts = np.minimum(counts, n)
    short = n - int(counts.sum())
    if short > 0:
        rem = quota - counts
        # stable sort on -rem keeps the smaller index first among ties
        order = np.argsort(-np.round(rem, 12), kind="stable")
        counts[order[:short]] += 1
    elif short < 0:
        rem = quota - counts
        order = np.argsort(np.round(rem, 12), kind="stable")
        counts[order[:-short]] -= 1
    return ExactDesign(design.points, counts, n)


def merge_support(design, tol):
    """Merge atoms closer than ``tol`` at their weight-averaged location."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if tol == 0 or design.size < 2:
        return design
    groups = [[0]]
    for i in range(1, design.size):
        if design.points[i] - design.points[groups[-1][-1]] < tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    if len(groups) == design.size:
        return design
    x = np.empty(len(groups))
    w = np.empty(len(groups))
    for g, idx in enumerate(groups):
        ww = design.weights[idx]
        w[g] = math.fsum(ww)
        x[g] = float(np.dot(ww, design.points[idx]) / w[g])
    return Design(x, _normalize(w))


def mix(a, b, alpha):
    """The design ``(1 - alpha) a + alpha b``."""
    x = np.concatenate([a.points, b.points])
    w = np.concatenate([(1.0 - alpha) * a.weights, alpha * b.weights])
    return make_design(x, w / math.fsum(w))


def dirac(x):
    return Design([float(x)], [1.0])


# --------------------------------------------------------------------------
# dense linear algebra (double precision throughout)


def solve_sym(A, b):
    """Solve a symmetric system, Cholesky first and LU as fallback."""
    A = np.asarray(A, dtype=float)
    try:
        L = np.linalg.cholesky(A)
        z = np.linalg.solve(L, b)
        return np.linalg.solve(L.T, z)
    except np.linalg.LinAlgError:
        return np.linalg.solve(A, b)


def det(A):
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 1.0
    return float(np.linalg.det(A))


def inv_sym(A):
    A = np.asarray(A, dtype=float)
    Ai = np.linalg.inv(A)
    return 0.5 * (Ai + Ai.T)


def weighted_lstsq(X, y, w, rcond=1e-10):
    """Weighted least squares via QR/SVD on the row-scaled system.

    Returns ``(beta, rank)``; ``beta`` is the minimum-norm solution when the
    weighted design matrix is rank deficient.
    """
    sw = np.sqrt(np.asarray(w, dtype=float))
    Xw = np.asarray(X, dtype=float) * sw[:, None]
    yw = np.asarray(y, dtype=float) * sw
    beta, _, rank, _ = np.linalg.lstsq(Xw, yw, rcond=rcond)
    return beta, int(rank)


def moment_matrix(G, w):
    """``sum_i w_i g_i g_i^T`` for rows ``g_i`` of ``G``."""
    G = np.asarray(G, dtype=float)
    M = (G * np.asarray(w, dtype=float)[:, None]).T @ G
    return 0.5 * (M + M.T)
