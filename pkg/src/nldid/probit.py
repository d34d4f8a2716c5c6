"""Probit maximum likelihood with analytic score and information.

The fit stores ``sigma``, the asymptotic covariance of sqrt(n)(kappa_hat - kappa),
estimated as ``n * inv(I(kappa_hat))`` where ``I`` is the summed information
sum_i phi(z_i)^2 / (Phi(z_i) Phi(-z_i)) x_i x_i'. Standard errors of the
coefficients are therefore sqrt(diag(sigma) / n).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DegenerateOutcomeError,
    DomainError,
    RankDeficiencyError,
    SingularMatrixError,
)
from .numerics import cholesky, inverse_symmetric, solve_symmetric, std_normal_cdf, std_normal_quantile

SEPARATION_BOUND = 30.0
RANK_TOL = 1e-10
LL_SLACK = 1e-13


@dataclass(frozen=True, eq=False)
class ProbitFit:
    kappa: np.ndarray
    sigma: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    n: int
    column_names: tuple
    score_norm: float
    separation: bool = False

    @property
    def se(self):
        return np.sqrt(np.diag(self.sigma) / self.n)

    @property
    def z(self):
        return self.kappa / self.se

    @property
    def p_values(self):
        return 2.0 * std_normal_cdf(-np.abs(self.z))

    def coef(self, name):
        return float(self.kappa[self.column_names.index(name)])

    def to_dict(self):
        return {
            "schema_version": 1,
            "kappa": [float(v) for v in self.kappa],
            "sigma": [[float(v) for v in row] for row in self.sigma],
            "se": [float(v) for v in self.se],
            "loglik": float(self.loglik),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "score_norm": float(self.score_norm),
            "n": int(self.n),
            "separation": bool(self.separation),
            "column_names": list(self.column_names),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kappa=np.asarray(d["kappa"], dtype=np.float64),
            sigma=np.asarray(d["sigma"], dtype=np.float64),
            loglik=float(d["loglik"]),
            iterations=int(d.get("iterations", 0)),
            converged=bool(d["converged"]),
            n=int(d["n"]),
            column_names=tuple(d["column_names"]),
            score_norm=float(d.get("score_norm", 0.0)),
            separation=bool(d.get("separation", False)),
        )


def _design(sample):
    if hasattr(sample, "design"):
        return sample.design, sample.y, tuple(sample.column_names)
    X, y = sample
    X = np.asarray(X, dtype=np.float64)
    return X, np.asarray(y, dtype=np.float64), tuple(f"x{j}" for j in range(X.shape[1]))


def _check(kappa, X):
    kappa = np.asarray(kappa, dtype=np.float64)
    if kappa.ndim != 1 or kappa.shape[0] != X.shape[1]:
        raise DomainError(f"kappa has {kappa.size} entries, design has {X.shape[1]} columns")
    return kappa


def log_likelihood(kappa, sample):
    """sum_i y_i log Phi(z_i) + (1 - y_i) log Phi(-z_i)."""
    X, y, _ = _design(sample)
    return _kernels.probit_loglik(X, y, _check(kappa, X))


def score(kappa, sample):
    X, y, _ = _design(sample)
    return _kernels.probit_accumulate(X, y, _check(kappa, X))[1]


def information(kappa, sample):
    X, y, _ = _design(sample)
    return _kernels.probit_accumulate(X, y, _check(kappa, X))[2]


def check_full_rank(X, names):
    """Raise RankDeficiencyError naming the first column spanned by earlier ones."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->j", X, X))
    for j, nrm in enumerate(norms):
        if nrm == 0.0:
            raise RankDeficiencyError(f"column {names[j]!r} is identically zero", pivot=j, column=names[j])
    Xs = X / norms
    gram = Xs.T @ Xs
    try:
        cholesky(0.5 * (gram + gram.T), tol=RANK_TOL)
    except SingularMatrixError as exc:
        j = exc.pivot
        raise RankDeficiencyError(
            f"design is rank deficient: column {names[j]!r} is collinear with earlier columns",
            pivot=j,
            column=names[j],
        ) from None


def fit_probit(sample, max_iter=100, tol=1e-8, ridge=0.0, kappa0=None):
    """Newton-Raphson with step halving on the log-likelihood.

    Converged when ||score||_inf <= tol or the Newton direction is shorter
    than 1e-12. ``ridge`` is added to the information diagonal when computing the
    Newton direction only (not in ``sigma``); it defaults to 0.
    """
    X, y, names = _design(sample)
    n, p = X.shape
    if n == 0:
        raise DomainError("empty estimation sample")
    if np.all(y == y[0]):
        raise DegenerateOutcomeError("outcome is constant; probit likelihood has no interior maximum")
    check_full_rank(X, names)

    kappa = np.zeros(p) if kappa0 is None else np.array(kappa0, dtype=np.float64)
    ll, g, info = _kernels.probit_accumulate(X, y, kappa)
    converged = False
    it = 0
    while it < max_iter:
        if np.max(np.abs(g)) <= tol:
            converged = True
            break
        step_mat = info + ridge * np.eye(p) if ridge else info
        direction = solve_symmetric(step_mat, g)
        if np.max(np.abs(direction)) < 1e-12:
            converged = True
            break
        # near the optimum the gain is below the rounding of ll itself
        slack = LL_SLACK * (1.0 + abs(ll))
        t = 1.0
        while True:
            trial = kappa + t * direction
            ll_new = _kernels.probit_loglik(X, y, trial)
            if ll_new >= ll - slack or t < 1e-10:
                break
            t *= 0.5
        if ll_new < ll - slack:
            break
        it += 1
        kappa = trial
        ll, g, info = _kernels.probit_accumulate(X, y, kappa)
    score_norm = float(np.max(np.abs(g)))
    sigma = n * inverse_symmetric(info)
    separation = bool(np.any(np.abs(kappa) > SEPARATION_BOUND))
    if separation:
        warnings.warn("probit coefficients exceed the separation bound; check for perfect prediction", stacklevel=2)
    return ProbitFit(
        kappa=kappa,
        sigma=sigma,
        loglik=float(ll),
        iterations=it,
        converged=bool(converged),
        n=n,
        column_names=names,
        score_norm=score_norm,
        separation=separation,
    )


def wald_ci(fit, level=0.95):
    zq = std_normal_quantile(0.5 + level / 2.0)
    half = zq * fit.se
    return fit.kappa - half, fit.kappa + half

