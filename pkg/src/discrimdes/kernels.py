"""Hot numeric kernels.

Each kernel has a numba-compiled version and a pure-numpy version with the
same contract. Set ``DISCRIMDES_DISABLE_NUMBA=1`` to force the numpy path
(useful for debugging and on platforms without numba); the public names
below point at whichever implementation is active.
"""

import os

import numpy as np

_DISABLED = os.environ.get("DISCRIMDES_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    if _DISABLED:
        raise ImportError("numba disabled by DISCRIMDES_DISABLE_NUMBA")
    from numba import njit

    USE_NUMBA = True
except ImportError:
    USE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


# --------------------------------------------------------------------------
# local extrema of |v| on a grid


def _local_extrema_np(v):
    a = np.abs(v)
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    left = np.empty(n, dtype=bool)
    right = np.empty(n, dtype=bool)
    left[0] = True
    right[-1] = True
    left[1:] = a[1:] >= a[:-1]
    right[:-1] = a[:-1] >= a[1:]
    cand = left & right & (a > 0.0)
    # plateaus: keep the first index of each run of equal maxima
    dup = np.zeros(n, dtype=bool)
    dup[1:] = cand[1:] & cand[:-1] & (a[1:] == a[:-1])
    return np.flatnonzero(cand & ~dup).astype(np.int64)


@njit(cache=True, nogil=True)
def _local_extrema_jit(v):
    n = v.shape[0]
    out = np.empty(n, dtype=np.int64)
    k = 0
    prev_kept = False
    for i in range(n):
        ai = abs(v[i])
        keep = ai > 0.0
        if keep and i > 0 and ai < abs(v[i - 1]):
            keep = False
        if keep and i < n - 1 and ai < abs(v[i + 1]):
            keep = False
        if keep and prev_kept and ai == abs(v[i - 1]):
            prev_kept = True
            continue
        prev_kept = keep
        if keep:
            out[k] = i
            k += 1
    return out[:k]


# --------------------------------------------------------------------------
# exponential sums: value, parameter gradient, variable-projection scan


@njit(cache=True, nogil=True)
def expsum_eval(theta, x):
    """Sum of ``theta[2j] * exp(-theta[2j+1] * x)``."""
    out = np.zeros(x.shape[0])
    for j in range(theta.shape[0] // 2):
        out += theta[2 * j] * np.exp(-theta[2 * j + 1] * x)
    return out


@njit(cache=True, nogil=True)
def expsum_grad(theta, x):
    """Gradient of :func:`expsum_eval`, shape ``(len(x), len(theta))``."""
    n = x.shape[0]
    p = theta.shape[0]
    g = np.empty((n, p))
    for j in range(p // 2):
        e = np.exp(-theta[2 * j + 1] * x)
        g[:, 2 * j] = e
        g[:, 2 * j + 1] = -theta[2 * j] * x * e
    return g


def _varpro_rss_np(x, y, w, rates):
    # rates: (K, k). Returns rss (K,) and amplitudes (K, k).
    E = np.exp(-rates[:, None, :] * x[None, :, None])  # (K, n, k)
    Ew = E * w[None, :, None]
    A = np.einsum("kni,knj->kij", Ew, E)
    b = np.einsum("kni,n->ki", Ew, y)
    k = rates.shape[1]
    ridge = 1e-13 * (np.einsum("kii->k", A)[:, None, None] + 1e-300) * np.eye(k)
    amps = np.linalg.solve(A + ridge, b[..., None])[..., 0]
    resid = y[None, :] - np.einsum("kni,ki->kn", E, amps)
    rss = np.einsum("kn,n,kn->k", resid, w, resid)
    return rss, amps


@njit(cache=True, nogil=True)
def _varpro_rss_jit(x, y, w, rates):
    K, k = rates.shape
    n = x.shape[0]
    rss = np.empty(K)
    amps = np.empty((K, k))
    E = np.empty((n, k))
    for r in range(K):
        for j in range(k):
            for i in range(n):
                E[i, j] = np.exp(-rates[r, j] * x[i])
        A = np.zeros((k, k))
        b = np.zeros(k)
        for i in range(n):
            for p in range(k):
                b[p] += w[i] * E[i, p] * y[i]
                for q in range(k):
                    A[p, q] += w[i] * E[i, p] * E[i, q]
        tr = 0.0
        for p in range(k):
            tr += A[p, p]
        for p in range(k):
            A[p, p] += 1e-13 * (tr + 1e-300)
        a = np.linalg.solve(A, b)
        s = 0.0
        for i in range(n):
            f = 0.0
            for p in range(k):
                f += E[i, p] * a[p]
            d = y[i] - f
            s += w[i] * d * d
        rss[r] = s
        amps[r] = a
    return rss, amps


# --------------------------------------------------------------------------
# Levenberg-Marquardt for weighted exponential-sum least squares


@njit(cache=True, nogil=True)
def lm_expsum(x, y, w, theta0, lo, hi, max_iter=200, tol=1e-12):
    """Minimise ``sum w (y - expsum(theta, x))**2`` inside the box [lo, hi].

    Returns ``(theta, rss, iterations)``. Steps leaving the box are clipped.
    """
    sw = np.sqrt(w)
    theta = np.minimum(np.maximum(theta0.copy(), lo), hi)
    r = sw * (y - expsum_eval(theta, x))
    cost = np.dot(r, r)
    lam = 1e-3
    p = theta.shape[0]
    it = 0
    for it in range(1, max_iter + 1):
        J = expsum_grad(theta, x) * sw.reshape(-1, 1)
        A = J.T @ J
        g = J.T @ r
        dA = np.empty(p)
        for i in range(p):
            dA[i] = A[i, i] + 1e-12
        accepted = False
        step_norm = 0.0
        new_cost = cost
        for _ in range(30):
            D = A.copy()
            for i in range(p):
                D[i, i] += lam * dA[i]
            d = np.linalg.solve(D, g)
            cand = np.minimum(np.maximum(theta + d, lo), hi)
            rc = sw * (y - expsum_eval(cand, x))
            cc = np.dot(rc, rc)
            if np.isfinite(cc) and cc < cost:
                step_norm = np.sqrt(np.dot(cand - theta, cand - theta))
                theta = cand
                r = rc
                new_cost = cc
                accepted = True
                lam = max(lam / 3.0, 1e-12)
                break
            lam *= 4.0
            if lam > 1e16:
                break
        if not accepted:
            break
        drop = cost - new_cost
        cost = new_cost
        if drop <= tol * (cost + 1e-300) and step_norm <= 1e-9 * (1.0 + np.sqrt(np.dot(theta, theta))):
            break
    return theta, cost, it


if USE_NUMBA:
    local_extrema = _local_extrema_jit
    varpro_rss = _varpro_rss_jit
else:
    local_extrema = _local_extrema_np
    varpro_rss = _varpro_rss_np


def py_func(f):
    """Uncompiled body of a kernel (identity when numba is disabled)."""
    return getattr(f, "py_func", f)
