"""Mean-function families, fixed "true" means and observation models.

A *family* is anything with ``n_params``, ``mean(theta, x)``,
``gradient(theta, x)`` (shape ``(len(x), n_params)``), ``lower``/``upper``
parameter boxes and an ``is_linear`` flag. Two families ship here:
:class:`LinearModel` over a :class:`BasisSet` and :class:`ExpSumModel`.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import BadTheta, ValidationError


def _as_x(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


# --------------------------------------------------------------------------
# bases


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Ordered list of scalar regression functions."""

    functions: tuple
    kind: str = "custom-list"
    labels: tuple = ()
    degrees: tuple = ()

    @property
    def m(self):
        return len(self.functions)

    @classmethod
    def monomials(cls, k):
        """Monomials of degree ``0 .. k-1``."""
        if k < 1:
            raise ValidationError("need at least one monomial")
        fns = tuple((lambda x, d=d: np.asarray(x, dtype=float) ** d) for d in range(k))
        labels = tuple("1" if d == 0 else ("x" if d == 1 else f"x^{d}") for d in range(k))
        return cls(fns, "monomial", labels, tuple(range(k)))

    @classmethod
    def powers(cls, degrees):
        degrees = tuple(int(d) for d in degrees)
        fns = tuple((lambda x, d=d: np.asarray(x, dtype=float) ** d) for d in degrees)
        labels = tuple("1" if d == 0 else ("x" if d == 1 else f"x^{d}") for d in degrees)
        kind = "monomial" if degrees == tuple(range(len(degrees))) else "custom-list"
        return cls(fns, kind, labels, degrees)

    @classmethod
    def exponentials(cls, rates):
        fns = tuple((lambda x, b=float(b): np.exp(-b * np.asarray(x, dtype=float))) for b in rates)
        return cls(fns, "custom-list", tuple(f"exp(-{b}x)" for b in rates))

    @classmethod
    def custom(cls, functions, labels=()):
        return cls(tuple(functions), "custom-list", tuple(labels))

    def evaluate(self, x):
        x = _as_x(x)
        if self.degrees and len(self.degrees) == self.m:
            return x[:, None] ** np.asarray(self.degrees, dtype=float)[None, :]
        out = np.empty((x.size, self.m))
        for j, f in enumerate(self.functions):
            out[:, j] = np.broadcast_to(f(x), x.shape)
        return out

    def extend(self, *functions, labels=()):
        labs = tuple(labels) or tuple(f"h{self.m + i + 1}" for i in range(len(functions)))
        return BasisSet(self.functions + tuple(functions), "custom-list", self.labels + labs)

    def __add__(self, other):
        return BasisSet(
            self.functions + other.functions,
            "custom-list",
            self.labels + other.labels,
            self.degrees + other.degrees if self.degrees and other.degrees else (),
        )


# --------------------------------------------------------------------------
# families


@dataclass(frozen=True, eq=False)
class LinearModel:
    """``theta^T f(x)``; ``theta`` optional (fixed when given)."""

    basis: BasisSet
    theta: np.ndarray = None

    is_linear = True

    def __post_init__(self):
        if self.theta is not None:
            t = np.asarray(self.theta, dtype=float).ravel()
            if t.size != self.basis.m:
                raise BadTheta(f"theta has {t.size} entries, basis has {self.basis.m}")
            object.__setattr__(self, "theta", t)

    @property
    def n_params(self):
        return self.basis.m

    @property
    def lower(self):
        return np.full(self.n_params, -np.inf)

    @property
    def upper(self):
        return np.full(self.n_params, np.inf)

    def _check(self, theta):
        t = np.asarray(theta, dtype=float).ravel()
        if t.size != self.n_params:
            raise BadTheta(f"expected {self.n_params} parameters, got {t.size}")
        return t

    def mean(self, theta, x):
        return self.basis.evaluate(x) @ self._check(theta)

    def gradient(self, theta, x):
        self._check(theta)
        return self.basis.evaluate(x)


@dataclass(frozen=True, eq=False)
class ExpSumModel:
    """``sum_j a_j exp(-b_j x)`` with ``theta = (a_1, b_1, a_2, b_2, ...)``.

    ``terms`` fixes the parameters; the box ``amp_bounds``/``rate_bounds``
    applies to fitting.
    """

    n_terms: int
    terms: tuple = None
    amp_bounds: tuple = (-100.0, 100.0)
    rate_bounds: tuple = (-10.0, 10.0)

    is_linear = False

    def __post_init__(self):
        if self.n_terms < 1:
            raise ValidationError("need at least one exponential term")
        if self.terms is not None:
            terms = tuple((float(a), float(b)) for a, b in self.terms)
            if len(terms) != self.n_terms:
                raise BadTheta(f"{len(terms)} terms given, model has {self.n_terms}")
            rates = sorted(b for _, b in terms)
            if any(r2 - r1 < 1e-8 for r1, r2 in zip(rates, rates[1:])):
                raise BadTheta("exponential rates must be pairwise distinct")
            object.__setattr__(self, "terms", terms)

    @classmethod
    def fixed(cls, terms, **kw):
        terms = tuple(tuple(t) for t in terms)
        return cls(len(terms), terms, **kw)

    @property
    def n_params(self):
        return 2 * self.n_terms

    @property
    def theta(self):
        if self.terms is None:
            return None
        return np.array([v for t in self.terms for v in t], dtype=float)

    @property
    def lower(self):
        return np.tile([self.amp_bounds[0], self.rate_bounds[0]], self.n_terms).astype(float)

    @property
    def upper(self):
        return np.tile([self.amp_bounds[1], self.rate_bounds[1]], self.n_terms).astype(float)

    def _check(self, theta):
        t = np.ascontiguousarray(theta, dtype=float).ravel()
        if t.size != self.n_params:
            raise BadTheta(f"expected {self.n_params} parameters, got {t.size}")
        return t

    def mean(self, theta, x):
        return kernels.expsum_eval(self._check(theta), np.ascontiguousarray(_as_x(x)))

    def gradient(self, theta, x):
        return kernels.expsum_grad(self._check(theta), np.ascontiguousarray(_as_x(x)))

    def amplitudes(self, theta):
        return self._check(theta)[0::2]

    def rates(self, theta):
        return self._check(theta)[1::2]

    def varisolvence_degree(self, theta, tol=0.0):
        """Term count plus the number of nonvanishing amplitudes.

        Heuristic degree of varisolvence at ``theta`` (a diagnostic only).
        """
        a = self.amplitudes(theta)
        return int(self.n_terms + np.count_nonzero(np.abs(a) > tol))


# --------------------------------------------------------------------------
# fixed means and observation models


@dataclass(frozen=True, eq=False)
class FixedMean:
    """A fully specified mean function ``eta(x)``.

    ``family``/``theta`` are kept when the mean comes from a parametric model
    so that nested problems can recover the true parameter vector.
    """

    func: Callable
    label: str = "eta"
    family: object = None
    theta: np.ndarray = None

    def __call__(self, x):
        x = _as_x(x)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape).copy()

    @classmethod
    def polynomial(cls, coefficients):
        c = np.asarray(coefficients, dtype=float).ravel()
        basis = BasisSet.monomials(c.size)
        terms = " + ".join(f"{v:g}*{lab}" for v, lab in zip(c, basis.labels) if v != 0) or "0"
        return cls.from_model(LinearModel(basis), c, label=terms)

    @classmethod
    def from_model(cls, family, theta, label=None):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size != family.n_params:
            raise BadTheta(f"expected {family.n_params} parameters, got {theta.size}")
        return cls(lambda x: family.mean(theta, x), label or "eta", family, theta)

    @classmethod
    def exponential_sum(cls, terms):
        model = ExpSumModel.fixed(terms)
        lab = " + ".join(f"{a:g}*exp(-{b:g}x)" for a, b in model.terms)
        return cls.from_model(model, model.theta, label=lab)

    @classmethod
    def zero(cls):
        return cls(lambda x: np.zeros_like(x), "0")


@dataclass(frozen=True)
class Precision:
    """Observation precision ``lambda(x)`` (inverse variance)."""

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "one_minus_x2"):
            raise ValidationError(f"unsupported precision kind {self.kind!r}")
        if not self.value > 0:
            raise ValidationError("precision scale must be positive")

    def __call__(self, x):
        x = _as_x(x)
        if self.kind == "constant":
            return np.full(x.shape, float(self.value))
        return self.value * (1.0 - x * x)


@dataclass(frozen=True, eq=False)
class GaussianObsModel:
    mean: object
    precision: Precision = field(default_factory=Precision)


# --------------------------------------------------------------------------
# nested pairs


@dataclass(frozen=True, eq=False)
class NestedPair:
    """A full model with parameter ``theta`` and tested coordinates ``extension``.

    The reduced model is the full model with the extension coordinates
    removed; for linear models that is an exact prefix of the basis when
    ``extension`` is the trailing block.
    """

    full: object
    theta: np.ndarray
    extension: tuple

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=float).ravel()
        if t.size != self.full.n_params:
            raise BadTheta(f"expected {self.full.n_params} parameters, got {t.size}")
        ext = tuple(sorted(int(i) for i in self.extension))
        if not ext or len(set(ext)) != len(ext) or ext[0] < 0 or ext[-1] >= t.size:
            raise ValidationError(f"bad extension indices {self.extension}")
        if len(ext) == t.size:
            raise ValidationError("reduced model must keep at least one parameter")
        object.__setattr__(self, "theta", t)
        object.__setattr__(self, "extension", ext)

    @classmethod
    def linear(cls, reduced, extra, theta2, theta0):
        """``theta2^T f(x) + theta0^T g(x)`` with ``f = reduced``, ``g = extra``."""
        theta2 = np.asarray(theta2, dtype=float).ravel()
        theta0 = np.asarray(theta0, dtype=float).ravel()
        if theta2.size != reduced.m or theta0.size != extra.m:
            raise BadTheta("parameter lengths do not match the bases")
        full = LinearModel(reduced + extra)
        m2 = reduced.m
        return cls(full, np.concatenate([theta2, theta0]), tuple(range(m2, m2 + extra.m)))

    @property
    def m1(self):
        return self.full.n_params

    @property
    def m0(self):
        return len(self.extension)

    @property
    def m2(self):
        return self.m1 - self.m0

    @property
    def reduced_indices(self):
        ext = set(self.extension)
        return tuple(i for i in range(self.m1) if i not in ext)

    @property
    def theta0(self):
        return self.theta[list(self.extension)]

    def true_mean(self):
        return FixedMean.from_model(self.full, self.theta)

    def gradients(self, x):
        """Full-model gradient rows at ``theta`` (shape ``(len(x), m1)``)."""
        return self.full.gradient(self.theta, x)


# --------------------------------------------------------------------------
# functional interface


def eval_mean(model, theta, x):
    out = model.mean(theta, x)
    return float(out[0]) if np.ndim(x) == 0 else out


def eval_gradient(model, theta, x):
    g = model.gradient(theta, x)
    return g[0] if np.ndim(x) == 0 else g


def check_chebyshev_system(basis, space, trials=2000, seed=0):
    """Sampled test of the Chebyshev property of ``basis`` on ``space``.

    Draws ``trials`` strictly increasing point sets and checks that the
    generalized Vandermonde determinant keeps one strict sign. A ``False``
    answer is conclusive; ``True`` is evidence only.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    k = basis.m
    rng = np.random.default_rng(seed)
    pts = np.sort(rng.uniform(space.lower, space.upper, size=(trials, k)), axis=1)
    # include configurations touching the endpoints
    pts[: trials // 4, 0] = space.lower
    pts[trials // 8 : trials // 4, -1] = space.upper
    if k > 1:
        pts = pts[np.all(np.diff(pts, axis=1) > 0, axis=1)]
    H = basis.evaluate(pts.ravel()).reshape(pts.shape[0], k, k)  # [trial, point, function]
    sign, logabs = np.linalg.slogdet(H)
    if np.any(sign == 0) or not np.all(np.isfinite(logabs)):
        return False
    return bool(np.all(sign == sign[0]))


def family_from_basis_or_model(rival):
    """Accept a :class:`BasisSet` wherever a family is expected."""
    if isinstance(rival, BasisSet):
        return LinearModel(rival)
    return rival
