"""Nonlinear DiD effects on the treated, delta-method inference and summaries.

For a treated row with covariates x the effect is

    tau(x) = Phi(alpha + beta + x.gamma + x.theta) - Phi(alpha + beta + x.theta)

i.e. the treated potential outcome (interaction active) minus the untreated
one. kappa is laid out as (alpha, beta, gamma-block, theta-block), matching
``data.DESIGN_COLUMNS``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _kernels
from .data import XW_COLUMNS, build_estimation_sample, check_windows
from .errors import ConfigurationError, EmptyResultError, NotConvergedError
from .numerics import std_normal_cdf
from .probit import fit_probit

DEFAULT_Q = 0.05


def _require_converged(fit):
    if not fit.converged:
        raise NotConvergedError("probit fit did not converge; effects are not defined")


def _rows(fit, x_row, xw_row):
    x = np.atleast_2d(np.asarray(x_row, dtype=np.float64))
    xw = x if xw_row is None else np.atleast_2d(np.asarray(xw_row, dtype=np.float64))
    q = (len(fit.kappa) - 2) // 2
    if x.shape[1] != q or xw.shape != x.shape:
        raise ConfigurationError(f"covariate rows must have {q} entries")
    return x, xw


def effect_on_treated(fit, x_row, xw_row=None):
    """tau for one treated row; ``xw_row`` defaults to ``x_row`` (W = 1)."""
    _require_converged(fit)
    x, xw = _rows(fit, x_row, xw_row)
    tau, _, _ = _kernels.effects(fit.kappa, x, xw, np.zeros_like(fit.sigma))
    return float(tau[0])


def effect_gradient(fit, x_row, xw_row=None):
    """d tau / d kappa for one treated row."""
    _require_converged(fit)
    x, xw = _rows(fit, x_row, xw_row)
    _, grad, _ = _kernels.effects(fit.kappa, x, xw, np.zeros_like(fit.sigma))
    return grad[0]


class EffectSE(NamedTuple):
    se: float
    degenerate: bool


def effect_variance(fit, x_row, xw_row=None):
    """Delta-method standard error sqrt(Omega Sigma Omega' / n)."""
    _require_converged(fit)
    x, xw = _rows(fit, x_row, xw_row)
    _, grad, se = _kernels.effects(fit.kappa, x, xw, fit.sigma / fit.n)
    degenerate = not np.any(grad[0])
    return EffectSE(0.0 if degenerate else float(se[0]), degenerate)


def bh_adjust(p):
    """Benjamini-Hochberg step-up adjusted p-values, in the input order."""
    p = np.asarray(p, dtype=np.float64)
    m = p.size
    if m == 0:
        return p.copy()
    order = np.argsort(p, kind="stable")
    ranked = p[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum(np.minimum.accumulate(ranked[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adj_sorted
    return out


@dataclass(frozen=True, eq=False)
class EffectTable:
    household_id: np.ndarray
    child_index: np.ndarray
    tau: np.ndarray
    se: np.ndarray
    t_stat: np.ndarray
    p_raw: np.ndarray
    p_adj: np.ndarray
    head_educated: np.ndarray
    low_hwi: np.ndarray
    degenerate: np.ndarray
    q: float = DEFAULT_Q

    def __len__(self):
        return len(self.tau)

    @property
    def significant(self):
        return np.nan_to_num(self.p_adj, nan=1.0) <= self.q

    def subset(self, mask):
        mask = np.asarray(mask, dtype=bool)
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        return EffectTable(**{k: (v[mask] if isinstance(v, np.ndarray) else v) for k, v in fields.items()})


def test_effects(effects, q=DEFAULT_Q):
    """Two-sided normal p-values and their BH(q) adjustment.

    Rows with zero standard error carry NaN statistics and are left out of
    the adjustment.
    """
    ok = ~effects.degenerate & (effects.se > 0)
    t = np.full(len(effects), np.nan)
    p = np.full(len(effects), np.nan)
    adj = np.full(len(effects), np.nan)
    t[ok] = effects.tau[ok] / effects.se[ok]
    p[ok] = 2.0 * std_normal_cdf(-np.abs(t[ok]))
    adj[ok] = bh_adjust(p[ok])
    return replace(effects, t_stat=t, p_raw=p, p_adj=adj, q=q)


def compute_effects(fit, sample, q=DEFAULT_Q):
    """Effects, delta-method se and BH-adjusted p-values for every treated row."""
    _require_converged(fit)
    tr = sample.treated
    x = sample.x[tr]
    tau, grad, se = _kernels.effects(fit.kappa, x, x, fit.sigma / fit.n)
    degenerate = ~np.any(grad != 0.0, axis=1)
    se = np.where(degenerate, 0.0, se)
    nan = np.full(len(tau), np.nan)
    table = EffectTable(
        household_id=sample.household_id[tr],
        child_index=sample.child_index[tr],
        tau=tau,
        se=se,
        t_stat=nan,
        p_raw=nan,
        p_adj=nan,
        head_educated=sample.head_educated[tr],
        low_hwi=sample.low_hwi[tr],
        degenerate=degenerate,
        q=q,
    )
    return test_effects(table, q)


FILTERS = ("all", "head_educated", "head_non_educated", "low_hwi", "high_hwi", "significant")


def _filter_mask(effects, which):
    if not isinstance(which, str):
        return np.asarray(which, dtype=bool)
    if which == "all":
        return np.ones(len(effects), dtype=bool)
    if which == "head_educated":
        return effects.head_educated
    if which == "head_non_educated":
        return ~effects.head_educated
    if which == "low_hwi":
        return effects.low_hwi
    if which == "high_hwi":
        return ~effects.low_hwi
    if which == "significant":
        return effects.significant
    raise ConfigurationError(f"unknown filter {which!r}; choose from {', '.join(FILTERS)}")


def average_effect(effects, which="all", significant_only=False):
    """Mean of tau over treated rows passing the filter."""
    mask = _filter_mask(effects, which)
    if significant_only:
        mask = mask & effects.significant
    if not mask.any():
        raise EmptyResultError(f"no treated rows pass filter {which!r}")
    return float(effects.tau[mask].mean())


def summarize(effects):
    """Unconditional and significant-only averages for every named filter."""
    out = {}
    for name in FILTERS:
        for sig in (False, True):
            if name == "significant" and sig:
                continue
            key = f"{name}_significant_only" if sig else name
            try:
                out[key] = average_effect(effects, name, significant_only=sig)
            except EmptyResultError:
                out[key] = None
    out["n_treated"] = len(effects)
    out["n_significant"] = int(effects.significant.sum())
    return out


# --------------------------------------------------------------------------
# empirical CDFs and dominance
# --------------------------------------------------------------------------


def ecdf(values):
    """Sorted values and their empirical CDF heights."""
    v = np.sort(np.asarray(values, dtype=np.float64), kind="stable")
    return v, np.arange(1, v.size + 1) / v.size


def dominance(a, b):
    """Compare two samples by first-order stochastic dominance.

    From a's point of view: ``"dominates"`` when a's ECDF is <= b's at every
    pooled value and strictly below somewhere, ``"dominated"`` for the mirror
    case, ``"equal"`` when the ECDFs coincide and ``"crossing"`` otherwise.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptyResultError("both samples must be non-empty")
    pts = np.union1d(a, b)
    # F_a <= F_b compared as integers (count_a * n_b vs count_b * n_a): no rounding ties
    ia = np.searchsorted(a, pts, side="right") * b.size
    ib = np.searchsorted(b, pts, side="right") * a.size
    le = np.all(ia <= ib)
    ge = np.all(ia >= ib)
    if le and ge:
        return "equal"
    if le:
        return "dominates"
    if ge:
        return "dominated"
    return "crossing"


GROUPINGS = {
    "head_educated": ("educated", "non-educated"),
    "low_hwi": ("low-hwi", "high-hwi"),
}


@dataclass(frozen=True)
class SubgroupCDF:
    labels: tuple
    tables: dict
    relation: str

    @property
    def dominant(self):
        if self.relation == "dominates":
            return self.labels[0]
        if self.relation == "dominated":
            return self.labels[1]
        return None

    @property
    def verdict(self):
        if self.dominant is not None:
            return f"{self.dominant} dominates"
        return "no dominance (identical)" if self.relation == "equal" else "crossing"


def subgroup_cdf(effects, grouping="head_educated"):
    """ECDF tables of tau for two subgroups and their dominance verdict."""
    if isinstance(grouping, str):
        if grouping not in GROUPINGS:
            raise ConfigurationError(f"unknown grouping {grouping!r}; choose from {', '.join(GROUPINGS)}")
        mask = effects.head_educated if grouping == "head_educated" else effects.low_hwi
        labels = GROUPINGS[grouping]
    else:
        mask = np.asarray(grouping, dtype=bool)
        labels = ("A", "B")
    a, b = effects.tau[mask], effects.tau[~mask]
    if a.size == 0 or b.size == 0:
        raise EmptyResultError(f"subgroup {labels[0] if a.size == 0 else labels[1]!r} is empty")
    return SubgroupCDF(labels, {labels[0]: ecdf(a), labels[1]: ecdf(b)}, dominance(a, b))


# --------------------------------------------------------------------------
# placebo
# --------------------------------------------------------------------------

PLACEBO_THRESHOLDS = (35, 45, 55)


def placebo_windows(thresholds=PLACEBO_THRESHOLDS, start_age=29, pre_span=10):
    """(post, pre) windows: post = [start_age, s - 1], pre = [s, s + pre_span - 1]."""
    if start_age <= 28:
        raise ConfigurationError("placebo windows must lie above age 28")
    out = []
    for s in thresholds:
        s = int(s)
        if s <= start_age:
            raise ConfigurationError(f"threshold {s} must exceed the start age {start_age}")
        out.append(check_windows((start_age, s - 1), (s, s + pre_span - 1)))
    return out


@dataclass(frozen=True)
class PlaceboColumn:
    threshold: int | None
    post: tuple
    pre: tuple
    fit: object
    terms: tuple

    def to_dict(self):
        return {
            "label": f"T = 1{{Age < {self.threshold}}}" if self.threshold is not None else None,
            "post": list(self.post),
            "pre": list(self.pre),
            "n": int(self.fit.n),
            "converged": bool(self.fit.converged),
            "terms": {t["name"]: {k: v for k, v in t.items() if k != "name"} for t in self.terms},
        }


def interaction_tests(fit):
    """Wald tests on the interaction (gamma) block, BH-adjusted within the block."""
    idx = [fit.column_names.index(c) for c in XW_COLUMNS]
    p = fit.p_values[idx]
    adj = bh_adjust(p)
    return tuple(
        {
            "name": fit.column_names[i],
            "coef": float(fit.kappa[i]),
            "se": float(fit.se[i]),
            "z": float(fit.z[i]),
            "p_raw": float(pr),
            "p_adj": float(pa),
        }
        for i, pr, pa in zip(idx, p, adj)
    )


def placebo_run(panel, thresholds=PLACEBO_THRESHOLDS, start_age=29, pre_span=10, group="rural_female", windows=None):
    """Re-estimate on cohorts never exposed to the policy, one column per threshold."""
    if windows is None:
        wins = placebo_windows(thresholds, start_age, pre_span)
        labels = [int(s) for s in thresholds]
    else:
        wins = [check_windows(post, pre) for post, pre in windows]
        labels = [None] * len(wins)
    cols = []
    for label, (post, pre) in zip(labels, wins):
        sample = build_estimation_sample(panel, post=post, pre=pre, group=group)
        fit = fit_probit(sample)
        cols.append(PlaceboColumn(label, post, pre, fit, interaction_tests(fit)))
    return cols


def placebo_to_dict(columns):
    return {"schema_version": 1, "columns": [c.to_dict() for c in columns]}
