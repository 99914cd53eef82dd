"""Monte Carlo validation of designs: test rejection rates and estimator MSEs.

Replicate ``r`` draws its noise from a Philox generator whose counter is
offset by ``r``, so results do not depend on how replicates are scheduled
across threads.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os

import numpy as np
from scipy import stats

from .core import round_design
from .errors import DegenerateDesign, FitFailure, RankDeficient, ValidationError
from .fitting import fit_expsum, fit_expsum_fixed, halton_rates
from .models import BasisSet, ExpSumModel, family_from_basis_or_model


@dataclass(frozen=True)
class SimConfig:
    n: int = 50
    sigma2: float = 0.1
    reps: int = 1000
    seed: int = 20240601
    alpha: float = 0.05

    def __post_init__(self):
        if int(self.reps) < 100:
            raise ValidationError("reps must be at least 100")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        if not self.sigma2 > 0.0:
            raise ValidationError("sigma2 must be positive")
        if int(self.n) < 2:
            raise ValidationError("n must be at least 2")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass
class SimReport:
    estimate: object
    std_error: object
    reps: int
    seed: int
    kind: str
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        def conv(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, dict):
                return {k: conv(u) for k, u in v.items()}
            if isinstance(v, (list, tuple)):
                return [conv(u) for u in v]
            return v

        return {
            "kind": self.kind,
            "estimate": conv(self.estimate),
            "std_error": conv(self.std_error),
            "reps": self.reps,
            "seed": self.seed,
            "extras": conv(self.extras),
        }


@dataclass(frozen=True)
class FTest:
    """Nested linear F-test of ``reduced`` inside ``full``."""

    reduced: BasisSet
    full: BasisSet

    @property
    def m0(self):
        return self.full.m - self.reduced.m


@dataclass(frozen=True)
class LRTest:
    """Likelihood-ratio test of an exponential sum against fewer terms.

    With ``fixed_rates`` the extra terms of ``full`` keep those rates and
    only their amplitudes are tested, so ``df`` defaults to the number of
    extra terms. Otherwise every extra parameter is free and ``df`` defaults
    to the parameter-count difference.
    """

    reduced: ExpSumModel
    full: ExpSumModel
    df: int = None
    fixed_rates: tuple = None

    def __post_init__(self):
        extra = self.full.n_terms - self.reduced.n_terms
        if extra < 1:
            raise ValidationError("full model must have more terms than the reduced model")
        if self.fixed_rates is not None:
            fr = tuple(float(r) for r in np.atleast_1d(self.fixed_rates))
            if len(fr) != extra:
                raise ValidationError(f"need {extra} fixed rates, got {len(fr)}")
            object.__setattr__(self, "fixed_rates", fr)

    @classmethod
    def for_pair(cls, pair):
        """Test the extension amplitudes of an exponential ``pair`` at its rates."""
        full = pair.full
        ext = set(pair.extension)
        terms = [j for j in range(full.n_terms) if 2 * j in ext]
        if not terms or any(2 * j + 1 in ext for j in terms) or len(ext) != len(terms):
            raise ValidationError("pair must test amplitudes only")
        reduced = ExpSumModel(full.n_terms - len(terms), None, full.amp_bounds, full.rate_bounds)
        return cls(reduced, full, fixed_rates=tuple(pair.theta[2 * j + 1] for j in terms))

    @property
    def m0(self):
        if self.df is not None:
            return self.df
        if self.fixed_rates is not None:
            return len(self.fixed_rates)
        return self.full.n_params - self.reduced.n_params


def replicate_rng(seed, rep):
    """Independent stream for replicate ``rep`` of master ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, int(rep), 0, 0]))


def _noise(cfg, n):
    sd = math.sqrt(cfg.sigma2)
    return np.stack([sd * replicate_rng(cfg.seed, r).standard_normal(n) for r in range(cfg.reps)])


def default_threads():
    try:
        return max(1, int(os.environ.get("DISCRIMDES_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items, threads):
    threads = threads or default_threads()
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _rate_se(p, reps):
    return math.sqrt(max(p * (1.0 - p), 0.0) / reps)


def _allocation(design, n):
    exact = round_design(design, n)
    keep = exact.counts > 0
    return exact, exact.points[keep], exact.counts[keep]


# --------------------------------------------------------------------------
# statistics


def _rss(X, Y):
    """Residual sums of squares of the columns of ``Y`` regressed on ``X``."""
    Q, R = np.linalg.qr(X)
    resid = Y - Q @ (Q.T @ Y)
    return np.einsum("ij,ij->j", resid, resid)


def f_statistic(y, x, reduced, full):
    """``((RSS_r - RSS_f) / m0) / (RSS_f / (n - m1))`` for nested linear bases."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Xf = full.evaluate(x)
    n, m1 = Xf.shape
    m0 = m1 - reduced.m
    if n <= m1:
        raise RankDeficient(f"need more than {m1} observations, got {n}")
    if np.linalg.matrix_rank(Xf) < m1:
        raise RankDeficient("full-model design matrix is rank deficient")
    Y = y.reshape(n, -1)
    rf = _rss(Xf, Y)
    rr = _rss(reduced.evaluate(x), Y)
    F = ((rr - rf) / m0) / (rf / (n - m1))
    F = np.maximum(F, 0.0)
    return float(F[0]) if y.ndim == 1 else F


def lr_statistic(rss_reduced, rss_full, n):
    """``n log(RSS_r / RSS_f)`` with the variance profiled out."""
    if not (rss_full > 0 and rss_reduced > 0):
        raise FitFailure("residual sums of squares must be positive", (rss_reduced, rss_full))
    return max(n * math.log(rss_reduced / rss_full), 0.0)


def f_critical(alpha, m0, dfe):
    return float(stats.f.isf(alpha, m0, dfe))


def chi2_critical(alpha, df):
    return float(stats.chi2.isf(alpha, df))


def f_test_power(design, pair, cfg):
    """Noncentral-F power of the nested linear F-test at the rounded design."""
    from .core import make_design
    from .criteria import schur_noncentrality

    exact, pts, cnt = _allocation(design, cfg.n)
    rounded = make_design(pts, cnt / cfg.n)
    delta2 = cfg.n * schur_noncentrality(rounded, pair) / cfg.sigma2
    dfe = cfg.n - pair.m1
    crit = f_critical(cfg.alpha, pair.m0, dfe)
    return float(stats.ncf.sf(crit, pair.m0, dfe, delta2)), delta2


# --------------------------------------------------------------------------
# exponential-sum fits on grouped data


def _group_means(y, counts):
    idx = np.repeat(np.arange(counts.size), counts)
    sums = np.bincount(idx, weights=y, minlength=counts.size)
    means = sums / counts
    within = float(np.sum((y - means[idx]) ** 2))
    return means, within


def _expsum_starts(model, truth_theta, extra=()):
    starts = list(extra)
    if truth_theta is not None and truth_theta.size == model.n_params:
        t = np.asarray(truth_theta, dtype=float)
        starts.append(t)
        for f in (0.9, 1.1):
            p = t.copy()
            p[1::2] = t[1::2] * f + (f - 1.0)
            starts.append(p)
    need = max(8 - len(starts), 1)
    for r in halton_rates(model, need):
        th = np.zeros(model.n_params)
        th[1::2] = r
        starts.append(th)
    return starts[: max(8, len(extra) + 1)]


def _fit_grouped(model, xg, means, counts, within, starts, scan):
    res = fit_expsum(model, xg, means, counts.astype(float), starts=starts, scan=scan)
    return res.theta, res.rss + within


def _embed(reduced_theta, full):
    """A full-model point equal to the reduced fit (extra amplitudes zero)."""
    th = np.zeros(full.n_params)
    k = reduced_theta.size
    th[:k] = reduced_theta
    rates = reduced_theta[1::2]
    for j in range(k // 2, full.n_terms):
        th[2 * j + 1] = float(np.max(rates)) + 0.5 * (j + 1)
    lo, hi = full.lower, full.upper
    return np.clip(th, lo, hi)


# --------------------------------------------------------------------------
# public drivers


def _check_estimable(points, family):
    family = family_from_basis_or_model(family)
    if family.is_linear:
        X = family.basis.evaluate(points)
        if np.linalg.matrix_rank(X) < family.n_params:
            raise DegenerateDesign(
                f"{points.size} distinct design points cannot estimate {family.n_params} parameters"
            )
    elif points.size < family.n_params:
        raise DegenerateDesign(
            f"{points.size} distinct design points cannot estimate {family.n_params} parameters"
        )


def simulate_power(design, truth, test, cfg, threads=None):
    """Rejection rate of ``test`` for data with mean ``truth`` at ``design``."""
    exact, pts, cnt = _allocation(design, cfg.n)
    x = exact.expand()
    mu = truth(x)
    E = _noise(cfg, cfg.n)
    extras = {"counts": exact.counts, "points": exact.points}
    if isinstance(test, FTest):
        _check_estimable(pts, test.full)
        m1 = test.full.m
        if cfg.n <= m1:
            raise DegenerateDesign(f"n = {cfg.n} leaves no residual degrees of freedom")
        Y = (mu[None, :] + E).T
        F = f_statistic(Y, x, test.reduced, test.full)
        crit = f_critical(cfg.alpha, test.m0, cfg.n - m1)
        rej = F > crit
        extras.update(critical=crit)
    elif isinstance(test, LRTest):
        need = test.full.n_params - len(test.fixed_rates or ())
        if pts.size < need:
            raise DegenerateDesign(f"{pts.size} distinct design points cannot estimate {need} parameters")
        crit = chi2_critical(cfg.alpha, test.m0)
        truth_theta = getattr(truth, "theta", None)
        full_truth = truth_theta if truth_theta is not None and truth_theta.size == test.full.n_params else None
        red_truth = full_truth[: test.reduced.n_params] if full_truth is not None else None
        red_starts = [red_truth] if red_truth is not None else []

        def one(r):
            y = mu + E[r]
            means, within = _group_means(y, cnt)
            th_r, rss_r = _fit_grouped(test.reduced, pts, means, cnt, within, red_starts, True)
            if test.fixed_rates is None:
                starts = _expsum_starts(test.full, full_truth, extra=[_embed(th_r, test.full)])
                _, rss_f = _fit_grouped(test.full, pts, means, cnt, within, starts, False)
            else:
                res = fit_expsum_fixed(test.reduced, test.fixed_rates, pts, means, cnt.astype(float), starts=[th_r])
                rss_f = res.rss + within
            rss_f = min(rss_f, rss_r)
            return lr_statistic(rss_r, rss_f, cfg.n)

        LR = np.array(_pmap(one, range(cfg.reps), threads))
        rej = LR > crit
        extras.update(critical=crit, statistic_q95=float(np.quantile(LR, 0.95)))
    else:
        raise ValidationError(f"unsupported test {type(test).__name__}")
    p = float(np.mean(rej))
    return SimReport(p, _rate_se(p, cfg.reps), cfg.reps, cfg.seed, "power", extras)


def simulate_mse(design, truth, family, cfg, threads=None):
    """Per-parameter MSE of the least-squares estimates in ``family``.

    ``truth`` must carry its parameter vector (``FixedMean.from_model``).
    For linear families the analytic covariance diagonal
    ``sigma2 (X^T X)^-1`` at the rounded design is reported as ``analytic``.
    """
    family = family_from_basis_or_model(family)
    theta = getattr(truth, "theta", None)
    if theta is None or theta.size != family.n_params:
        raise ValidationError("truth must be a parametrised member of the fitted family")
    exact, pts, cnt = _allocation(design, cfg.n)
    _check_estimable(pts, family)
    x = exact.expand()
    mu = truth(x)
    E = _noise(cfg, cfg.n)
    extras = {"counts": exact.counts, "points": exact.points}
    if family.is_linear:
        X = family.basis.evaluate(x)
        est = np.linalg.lstsq(X, (mu[None, :] + E).T, rcond=None)[0].T
        extras["analytic"] = cfg.sigma2 * np.diag(np.linalg.inv(X.T @ X))
    elif isinstance(family, ExpSumModel):

        def one(r):
            means, within = _group_means(mu + E[r], cnt)
            th, _ = _fit_grouped(family, pts, means, cnt, within, _expsum_starts(family, theta), False)
            return th

        est = np.array(_pmap(one, range(cfg.reps), threads))
    else:
        raise ValidationError(f"unsupported family {type(family).__name__}")
    sq = (est - theta[None, :]) ** 2
    mse = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(cfg.reps)
    extras["bias"] = (est - theta[None, :]).mean(axis=0)
    extras["variance"] = est.var(axis=0, ddof=1)
    return SimReport(mse, se, cfg.reps, cfg.seed, "mse", extras)


def power_curve(design, truth_at, test, cfg, values, threads=None):
    """Rejection rate along a swept parameter (same noise at every value).

    ``truth_at(v)`` returns the mean function for swept value ``v``.
    Returns a list of ``(value, estimate, std_error)``.
    """
    rows = []
    for v in values:
        rep = simulate_power(design, truth_at(v), test, cfg, threads)
        rows.append((float(v), rep.estimate, rep.std_error))
    return rows
