"""Household education decision under a budget constraint.

A household with income y and education value b educates its daughter iff
y >= k and b >= k, where k is the financial cost; with k = 0 the rule is
b >= 0. Income and value are independent, drawn from F and G (F0/G0 for
non-educated heads, F1/G1 for educated heads). The effect of removing the
cost is

    tau = P(E = 1 | k = 0) - P(E = 1 | k) = (G(k) - G(0)) + F(k) (1 - G(k))   (k > 0)
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from . import _config
from .errors import ConfigurationError, DomainError

GROUPS = ("non-educated", "educated")
MC_CHUNK = 1 << 18


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise DomainError("sd must be positive")

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=np.float64) - self.mean) / self.sd)

    def sample(self, rng, size):
        return rng.normal(self.mean, self.sd, size)


@dataclass(frozen=True)
class BernoulliNormalMixture:
    """y = a + e with a ~ Bernoulli(p) on {0, 1} and e ~ N(loc, sd)."""

    p: float
    loc: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("p must lie in [0, 1]")
        if not self.sd > 0:
            raise DomainError("sd must be positive")

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.p * special.ndtr((x - 1.0 - self.loc) / self.sd) + (1.0 - self.p) * special.ndtr(
            (x - self.loc) / self.sd
        )

    def sample(self, rng, size):
        a = rng.random(size) < self.p
        return a + rng.normal(self.loc, self.sd, size)


def cdf(d, x):
    """CDF of a model distribution at x (scalar or array, infinities allowed)."""
    if not isinstance(d, (Normal, BernoulliNormalMixture)):
        raise DomainError(f"unsupported distribution {d!r}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(x)):
        raise DomainError("x must not be NaN")
    out = d.cdf(x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DecisionModelSpec:
    f0: object
    f1: object
    g0: object
    g1: object
    k: float = 0.1
    eta: float = 0.5

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("education cost k must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError("eta must lie in [0, 1]")

    @classmethod
    def parametric(cls, mu, p1, k=0.1, p0=0.5, loc0=0.0, loc1=0.1, eta=0.5):
        """Bernoulli-normal incomes and normal unit-variance values; educated value mean ``mu``."""
        return cls(
            f0=BernoulliNormalMixture(p0, loc0, 1.0),
            f1=BernoulliNormalMixture(p1, loc1, 1.0),
            g0=Normal(0.0, 1.0),
            g1=Normal(mu, 1.0),
            k=k,
            eta=eta,
        )

    def pair(self, group):
        g = _group(group)
        return (self.f1, self.g1) if g == 1 else (self.f0, self.g0)


def _group(group):
    if group in (0, 1):
        return int(group)
    if group in GROUPS:
        return GROUPS.index(group)
    raise ConfigurationError(f"group must be one of {GROUPS} or 0/1, got {group!r}")


def _cost(spec, k):
    k = spec.k if k is None else float(k)
    if k < 0:
        raise DomainError("k must be >= 0")
    return k


def enrollment_prob(spec, group, k=None):
    """P(E = 1) at cost k (defaults to spec.k)."""
    k = _cost(spec, k)
    F, G = spec.pair(group)
    if k == 0:
        return float(1.0 - G.cdf(0.0))
    return float((1.0 - F.cdf(k)) * (1.0 - G.cdf(k)))


def policy_effect(spec, group, k=None):
    """Change in enrollment probability when the cost k is removed."""
    k = _cost(spec, k)
    return enrollment_prob(spec, group, 0.0) - enrollment_prob(spec, group, k)


def closed_form_effect(spec, group, k=None):
    """(G(k) - G(0)) + F(k)(1 - G(k)), for k > 0; 0 at k = 0."""
    k = _cost(spec, k)
    if k == 0:
        return 0.0
    F, G = spec.pair(group)
    gk = float(G.cdf(k))
    return (gk - float(G.cdf(0.0))) + float(F.cdf(k)) * (1.0 - gk)


def gap_condition(spec, k=None):
    """True when non-educated households gain more, written as the budget/preference inequality."""
    k = _cost(spec, k)
    f0, f1 = float(spec.f0.cdf(k)), float(spec.f1.cdf(k))
    g0k, g1k = float(spec.g0.cdf(k)), float(spec.g1.cdf(k))
    g00, g10 = float(spec.g0.cdf(0.0)), float(spec.g1.cdf(0.0))
    return f1 * (1 - g1k) - f0 * (1 - g0k) < (g0k - g00) - (g1k - g10)


@dataclass(frozen=True, eq=False)
class GapGrid:
    mu: np.ndarray
    p1: np.ndarray
    tau0: float
    tau1: np.ndarray  # shape (len(p1), len(mu))
    k: float
    p0: float

    @property
    def f(self):
        return self.tau1 - self.tau0

    @property
    def sign(self):
        return np.sign(self.f).astype(int)

    def rows(self):
        f = self.f
        for i, p in enumerate(self.p1):
            for j, m in enumerate(self.mu):
                yield float(m), float(p), self.tau0, float(self.tau1[i, j]), float(f[i, j]), int(np.sign(f[i, j]))


def mu_grid(lo=0.0, hi=3.0, step=0.05):
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


def effect_gap_grid(mu, p1, k=0.1, p0=0.5, loc0=0.0, loc1=0.1):
    """f(mu, p1) = tau1 - tau0 over a grid of educated-household value means and income probabilities."""
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    p1 = np.atleast_1d(np.asarray(p1, dtype=np.float64))
    if mu.size == 0 or p1.size == 0:
        raise DomainError("grids must be non-empty")
    if k < 0:
        raise DomainError("k must be >= 0")
    tau0 = policy_effect(DecisionModelSpec.parametric(0.0, p0, k, p0, loc0, loc1), 0, k)
    tau1 = np.empty((p1.size, mu.size))
    for i, p in enumerate(p1):
        for j, m in enumerate(mu):
            tau1[i, j] = policy_effect(DecisionModelSpec.parametric(m, p, k, p0, loc0, loc1), 1, k)
    return GapGrid(mu, p1, tau0, tau1, float(k), float(p0))


def dominance_check(da, db, grid):
    """First-order dominance of distribution A over B on a finite grid.

    ``"dominates"`` if F_A <= F_B everywhere on the grid with strict
    inequality somewhere, ``"dominated"`` for the reverse, otherwise
    ``"equal"`` or ``"crossing"``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise DomainError("grid must be finite and non-empty")
    fa, fb = da.cdf(grid), db.cdf(grid)
    le, ge = np.all(fa <= fb), np.all(fa >= fb)
    if le and ge:
        return "equal"
    if le:
        return "dominates"
    if ge:
        return "dominated"
    return "crossing"


class MCResult(NamedTuple):
    tau_hat: float
    se: float
    enroll_k: float
    enroll_0: float
    n: int


def _mc_chunk(F, G, k, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    y = F.sample(rng, size)
    b = G.sample(rng, size)
    e_k = (y >= k) & (b >= k) if k > 0 else b >= 0.0
    e_0 = b >= 0.0
    return int(e_k.sum()), int(e_0.sum())


def mc_simulate(spec, group, k=None, n=1_000_000, seed=0):
    """Monte Carlo enrollment change from removing the cost, with binomial se.

    Both regimes use the same draws, so the per-household difference is 0/1
    and its variance is tau (1 - tau). Chunks of draws use seeds spawned from
    ``seed``; results do not depend on the thread cap.
    """
    k = _cost(spec, k)
    if n < 1:
        raise DomainError("n must be >= 1")
    F, G = spec.pair(group)
    sizes = [MC_CHUNK] * (n // MC_CHUNK)
    if n % MC_CHUNK:
        sizes.append(n % MC_CHUNK)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    threads = _config.get_threads()
    args = list(zip(sizes, seeds))
    if threads > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _mc_chunk(F, G, k, *a), args))
    else:
        parts = [_mc_chunk(F, G, k, *a) for a in args]
    ek = sum(p[0] for p in parts) / n
    e0 = sum(p[1] for p in parts) / n
    tau = e0 - ek
    se = float(np.sqrt(max(tau * (1.0 - tau), 0.0) / n))
    return MCResult(float(tau), se, float(ek), float(e0), int(n))
