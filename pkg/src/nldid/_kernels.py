"""Row-level hot loops of the probit likelihood and the per-row effect/delta step.

Two interchangeable backends live here:

* numba ``@njit`` kernels (default when numba imports), and
* vectorised numpy/scipy kernels (``NLDID_DISABLE_JIT=1`` or numba missing).

Both split the rows into fixed blocks of ``BLOCK`` rows, reduce each block on
its own and then add the block partials in block order. The partition never
depends on the worker count, so results are bit-identical for any thread cap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from . import _config

BLOCK = 2048

SQRT1_2 = 0.7071067811865476
LOG_SQRT_2PI = 0.9189385332046728
INV_SQRT_2PI = 0.3989422804014327
# below this the log-cdf and inverse Mills ratio switch to the continued fraction
TAIL = -8.0
_CF_TERMS = 60

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    # the portable layer; TBB is often present but too old
    numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def backend() -> str:
    """Name of the kernel backend that the dispatchers will use."""
    if HAVE_NUMBA and not _config.jit_disabled():
        return "numba"
    return "numpy"


def apply_thread_cap(n: int) -> None:
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


# --------------------------------------------------------------------------
# scalar normal functions (plain python; jitted below when numba is present)
# --------------------------------------------------------------------------


def _ndtr(x):
    return 0.5 * math.erfc(-x * SQRT1_2)


def _npdf(x):
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _mills(x):
    # (1 - Phi(x)) / phi(x) for large positive x; Laplace continued fraction
    t = x
    for k in range(_CF_TERMS, 0, -1):
        t = x + k / t
    return 1.0 / t


def _log_ndtr(z):
    if z < TAIL:
        return -0.5 * z * z - LOG_SQRT_2PI + math.log(_mills(-z))
    if z > 5.0:
        return math.log1p(-0.5 * math.erfc(z * SQRT1_2))
    return math.log(0.5 * math.erfc(-z * SQRT1_2))


def _inv_mills(z):
    # phi(z) / Phi(z)
    if z < TAIL:
        return 1.0 / _mills(-z)
    return _npdf(z) / _ndtr(z)


if HAVE_NUMBA:
    _ndtr_nb = njit(cache=True)(_ndtr)
    _npdf_nb = njit(cache=True)(_npdf)
    _mills_nb = njit(cache=True)(_mills)

    @njit(cache=True)
    def _log_ndtr_nb(z):
        if z < TAIL:
            return -0.5 * z * z - LOG_SQRT_2PI + math.log(_mills_nb(-z))
        if z > 5.0:
            return math.log1p(-0.5 * math.erfc(z * SQRT1_2))
        return math.log(0.5 * math.erfc(-z * SQRT1_2))

    @njit(cache=True)
    def _inv_mills_nb(z):
        if z < TAIL:
            return 1.0 / _mills_nb(-z)
        return _npdf_nb(z) / _ndtr_nb(z)

    @njit(parallel=True, cache=True)
    def _probit_nb(X, y, kappa, block):
        n, p = X.shape
        nblocks = (n + block - 1) // block
        ll_b = np.zeros(nblocks)
        sc_b = np.zeros((nblocks, p))
        in_b = np.zeros((nblocks, p, p))
        for b in prange(nblocks):
            lo = b * block
            hi = min(n, lo + block)
            acc = 0.0
            for i in range(lo, hi):
                z = 0.0
                for j in range(p):
                    z += X[i, j] * kappa[j]
                lam_pos = _inv_mills_nb(z)
                lam_neg = _inv_mills_nb(-z)
                if y[i] > 0.5:
                    acc += _log_ndtr_nb(z)
                    lam = lam_pos
                else:
                    acc += _log_ndtr_nb(-z)
                    lam = -lam_neg
                w = lam_pos * lam_neg
                for j in range(p):
                    xj = X[i, j]
                    sc_b[b, j] += lam * xj
                    wx = w * xj
                    for k in range(j + 1):
                        in_b[b, j, k] += wx * X[i, k]
            ll_b[b] = acc
        ll = 0.0
        score = np.zeros(p)
        info = np.zeros((p, p))
        for b in range(nblocks):
            ll += ll_b[b]
            for j in range(p):
                score[j] += sc_b[b, j]
                for k in range(j + 1):
                    info[j, k] += in_b[b, j, k]
        for j in range(p):
            for k in range(j):
                info[k, j] = info[j, k]
        return ll, score, info

    @njit(parallel=True, cache=True)
    def _loglik_nb(X, y, kappa, block):
        n, p = X.shape
        nblocks = (n + block - 1) // block
        ll_b = np.zeros(nblocks)
        for b in prange(nblocks):
            lo = b * block
            hi = min(n, lo + block)
            acc = 0.0
            for i in range(lo, hi):
                z = 0.0
                for j in range(p):
                    z += X[i, j] * kappa[j]
                if y[i] > 0.5:
                    acc += _log_ndtr_nb(z)
                else:
                    acc += _log_ndtr_nb(-z)
            ll_b[b] = acc
        ll = 0.0
        for b in range(nblocks):
            ll += ll_b[b]
        return ll

    @njit(parallel=True, cache=True)
    def _effects_nb(kappa, x, xw, V):
        m, q = x.shape
        p = kappa.shape[0]
        tau = np.empty(m)
        grad = np.zeros((m, p))
        se = np.empty(m)
        for i in prange(m):
            z0 = kappa[0] + kappa[1]
            for j in range(q):
                z0 += x[i, j] * kappa[2 + q + j]
            z1 = z0
            for j in range(q):
                z1 += xw[i, j] * kappa[2 + j]
            tau[i] = _ndtr_nb(z1) - _ndtr_nb(z0)
            d1 = _npdf_nb(z1)
            d = d1 - _npdf_nb(z0)
            grad[i, 0] = d
            grad[i, 1] = d
            for j in range(q):
                grad[i, 2 + j] = d1 * xw[i, j]
                grad[i, 2 + q + j] = d * x[i, j]
            s = 0.0
            for a in range(p):
                ga = grad[i, a]
                if ga == 0.0:
                    continue
                t = 0.0
                for c in range(p):
                    t += V[a, c] * grad[i, c]
                s += ga * t
            se[i] = math.sqrt(s) if s > 0.0 else 0.0
        return tau, grad, se


# --------------------------------------------------------------------------
# numpy backend
# --------------------------------------------------------------------------


def _inv_mills_np(z):
    return np.exp(-0.5 * z * z - LOG_SQRT_2PI - special.log_ndtr(z))


def _probit_block_np(X, y, kappa, lo, hi):
    Xb = X[lo:hi]
    yb = y[lo:hi] > 0.5
    z = Xb @ kappa
    ll = float(np.sum(np.where(yb, special.log_ndtr(z), special.log_ndtr(-z))))
    lam_pos = _inv_mills_np(z)
    lam_neg = _inv_mills_np(-z)
    lam = np.where(yb, lam_pos, -lam_neg)
    w = lam_pos * lam_neg
    score = Xb.T @ lam
    info = (Xb * w[:, None]).T @ Xb
    return ll, score, info


def _blocks(n):
    return [(lo, min(n, lo + BLOCK)) for lo in range(0, n, BLOCK)]


def _map_blocks(fn, n):
    spans = _blocks(n)
    threads = _config.get_threads()
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda s: fn(*s), spans))
    return [fn(*s) for s in spans]


def probit_numpy(X, y, kappa):
    n, p = X.shape
    parts = _map_blocks(lambda lo, hi: _probit_block_np(X, y, kappa, lo, hi), n)
    ll = 0.0
    score = np.zeros(p)
    info = np.zeros((p, p))
    for part_ll, part_score, part_info in parts:
        ll += part_ll
        score += part_score
        info += part_info
    info = 0.5 * (info + info.T)
    return ll, score, info


def loglik_numpy(X, y, kappa):
    n = X.shape[0]

    def one(lo, hi):
        z = X[lo:hi] @ kappa
        yb = y[lo:hi] > 0.5
        return float(np.sum(np.where(yb, special.log_ndtr(z), special.log_ndtr(-z))))

    ll = 0.0
    for part in _map_blocks(one, n):
        ll += part
    return ll


def effects_numpy(kappa, x, xw, V):
    q = x.shape[1]
    gamma = kappa[2 : 2 + q]
    theta = kappa[2 + q :]
    z0 = kappa[0] + kappa[1] + x @ theta
    z1 = z0 + xw @ gamma
    tau = special.ndtr(z1) - special.ndtr(z0)
    d1 = INV_SQRT_2PI * np.exp(-0.5 * z1 * z1)
    d = d1 - INV_SQRT_2PI * np.exp(-0.5 * z0 * z0)
    grad = np.concatenate([d[:, None], d[:, None], d1[:, None] * xw, d[:, None] * x], axis=1)
    var = np.einsum("ij,jk,ik->i", grad, V, grad)
    se = np.sqrt(np.clip(var, 0.0, None))
    return tau, grad, se


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------


def _prep(X, y, kappa):
    return (
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.ascontiguousarray(kappa, dtype=np.float64),
    )


def probit_accumulate(X, y, kappa):
    """Return ``(loglik, score, information)`` of the probit model at ``kappa``."""
    X, y, kappa = _prep(X, y, kappa)
    if backend() == "numba":
        ll, score, info = _probit_nb(X, y, kappa, BLOCK)
        return float(ll), score, info
    return probit_numpy(X, y, kappa)


def probit_loglik(X, y, kappa):
    X, y, kappa = _prep(X, y, kappa)
    if backend() == "numba":
        return float(_loglik_nb(X, y, kappa, BLOCK))
    return loglik_numpy(X, y, kappa)


def effects(kappa, x, xw, V):
    """Per-row effect on the treated, its gradient in kappa and delta-method se."""
    kappa = np.ascontiguousarray(kappa, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    xw = np.ascontiguousarray(xw, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64)
    if backend() == "numba":
        return _effects_nb(kappa, x, xw, V)
    return effects_numpy(kappa, x, xw, V)


# scalar helpers usable from both backends
log_ndtr_scalar = _log_ndtr
inv_mills_scalar = _inv_mills
