"""Standard normal functions, SPD solves and finite differences."""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg, special

from . import _kernels
from .errors import DomainError, SingularMatrixError

PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-10


def _finite(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def std_normal_cdf(x):
    """Phi(x) for a scalar or array; raises DomainError on non-finite input."""
    arr = _finite(x)
    return _out(special.ndtr(arr), x)


def std_normal_pdf(x):
    arr = _finite(x)
    return _out(np.exp(-0.5 * arr * arr) * _kernels.INV_SQRT_2PI, x)


def log_std_normal_cdf(x):
    """log Phi(x), accurate far into the lower tail."""
    arr = _finite(x)
    if arr.ndim == 0:
        return _kernels.log_ndtr_scalar(float(arr))
    return np.array([_kernels.log_ndtr_scalar(v) for v in arr.ravel()]).reshape(arr.shape)


def std_normal_quantile(p):
    """Phi^{-1}(p) for p in the open unit interval."""
    arr = np.asarray(p, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("quantile requires 0 < p < 1")
    return _out(special.ndtri(arr), p)


def cholesky(a, tol=PIVOT_TOL):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises SingularMatrixError carrying the index of the first pivot that is
    not above ``tol``.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise DomainError("matrix is not symmetric within tolerance")
    n = a.shape[0]
    L = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - L[j, :j] @ L[j, :j]
        if not d > tol:
            raise SingularMatrixError(f"non-positive pivot {d:.3e} at index {j}", pivot=j)
        L[j, j] = math.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (a[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_symmetric(a, b):
    """Solve ``a x = b`` for symmetric positive definite ``a`` via Cholesky."""
    b = np.asarray(b, dtype=np.float64)
    L = cholesky(a)
    if b.shape[0] != L.shape[0]:
        raise DomainError(f"dimension mismatch: matrix {L.shape}, rhs {b.shape}")
    y = linalg.solve_triangular(L, b, lower=True)
    return linalg.solve_triangular(L.T, y, lower=False)


def inverse_symmetric(a):
    a = np.asarray(a, dtype=np.float64)
    inv = solve_symmetric(a, np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def finite_diff_gradient(f, x, h=1e-5):
    """Central-difference gradient; step for coordinate i is h * (1 + |x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += step
        dn[i] -= step
        g[i] = (f(up) - f(dn)) / (up[i] - dn[i])
    return g


def finite_diff_jacobian(f, x, h=1e-5):
    """Rows are outputs, columns inputs; same stepping as finite_diff_gradient."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += step
        dn[i] -= step
        cols.append((np.asarray(f(up)) - np.asarray(f(dn))) / (up[i] - dn[i]))
    return np.stack(cols, axis=-1)
