"""Household-level regression of the share of educated daughters.

One row per household with at least one daughter inside the age windows:
``y_bar`` is the share of those daughters who are educated and ``r`` the share
of them in the post-policy window. The regression has the household covariates,
``r`` and its interactions with low wealth, number of children and a
non-educated head, optionally pairwise covariate interactions, and optionally
an average-daughter-age fixed effect absorbed by demeaning within integer
age bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import COVARIATES, DEFAULT_POST, DEFAULT_PRE, check_windows, household_covariates
from .errors import EmptyResultError
from .numerics import inverse_symmetric
from .probit import check_full_rank

MAIN_EFFECTS = ("educated_head", "low_hwi", "n_children", "muslim", "christian", "female_head")
TREATMENT_TERMS = ("R", "R:low_hwi", "R:n_children", "R:non_educated_head")
INTERACTION_BASE = ("educated_head", "low_hwi", "n_children", "female_head", "christian", "muslim")

TABLE3_SPECS = {"(1)": (True, False), "(2)": (False, True), "(3)": (True, True)}


@dataclass(frozen=True, eq=False)
class CrossSectionRows:
    household_id: np.ndarray
    y_bar: np.ndarray
    r: np.ndarray
    x: np.ndarray  # columns follow data.COVARIATES
    avg_age: np.ndarray
    age_bin: np.ndarray
    n_dropped: int

    def __len__(self):
        return len(self.y_bar)

    def col(self, name):
        return self.x[:, COVARIATES.index(name)]


def build_cross_section(panel, post=DEFAULT_POST, pre=DEFAULT_PRE, rural_only=True):
    post, pre = check_windows(post, pre)
    age = panel.child_age
    in_post = (age >= post[0]) & (age <= post[1])
    in_win = in_post | ((age >= pre[0]) & (age <= pre[1]))
    hh = panel.child_household
    daughter = panel.child_female & in_win
    if rural_only:
        daughter &= panel.rural[hh]
    H = panel.n_households
    n_d = np.bincount(hh[daughter], minlength=H)
    n_ed = np.bincount(hh[daughter & panel.child_educated], minlength=H)
    n_post = np.bincount(hh[daughter & in_post], minlength=H)
    age_sum = np.bincount(hh[daughter], weights=age[daughter].astype(float), minlength=H)
    considered = panel.rural if rural_only else np.ones(H, dtype=bool)
    keep = n_d > 0
    avg = age_sum[keep] / n_d[keep]
    return CrossSectionRows(
        household_id=panel.household_id[keep],
        y_bar=n_ed[keep] / n_d[keep],
        r=n_post[keep] / n_d[keep],
        x=household_covariates(panel)[keep][:, 1:],
        avg_age=avg,
        age_bin=np.floor(avg + 0.5).astype(np.int64),
        n_dropped=int((considered & ~keep).sum()),
    )


@dataclass(frozen=True, eq=False)
class CrossSectionFit:
    names: tuple
    coef: np.ndarray
    se: np.ndarray
    r2: float
    n: int
    dof: int
    fe: bool
    covariate_interactions: bool
    residuals: np.ndarray

    def __getitem__(self, name):
        return float(self.coef[self.names.index(name)])

    def to_dict(self):
        return {
            "fe": self.fe,
            "covariate_interactions": self.covariate_interactions,
            "n": self.n,
            "r2": float(self.r2),
            "coefficients": {
                n: {"coef": float(c), "se": float(s)} for n, c, s in zip(self.names, self.coef, self.se)
            },
        }


def design(rows, fe=True, covariate_interactions=False, interaction_base=INTERACTION_BASE):
    cols, names = [], []
    for name in MAIN_EFFECTS:
        cols.append(rows.col(name))
        names.append(name)
    r = rows.r
    cols += [r, r * rows.col("low_hwi"), r * rows.col("n_children"), r * (1.0 - rows.col("educated_head"))]
    names += list(TREATMENT_TERMS)
    if covariate_interactions:
        for a, b in combinations(interaction_base, 2):
            if {a, b} == {"christian", "muslim"}:
                continue
            cols.append(rows.col(a) * rows.col(b))
            names.append(f"{a}:{b}")
    if not fe:
        cols += [np.ones(len(rows)), rows.avg_age]
        names += ["const", "avg_girl_age"]
    return np.column_stack(cols), tuple(names)


def demean_within(values, groups):
    """Subtract group means (columns of a 2-D array or a vector)."""
    _, inv = np.unique(groups, return_inverse=True)
    counts = np.bincount(inv).astype(float)
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        return v - (np.bincount(inv, weights=v) / counts)[inv]
    means = np.stack([np.bincount(inv, weights=v[:, j]) / counts for j in range(v.shape[1])], axis=1)
    return v - means[inv]


def fit_cross_section(rows, fe=True, covariate_interactions=False, interaction_base=INTERACTION_BASE):
    """OLS with homoskedastic se; the age-bin fixed effect is absorbed by demeaning.

    R^2 is computed against the untransformed outcome.
    """
    if len(rows) == 0:
        raise EmptyResultError("no households with daughters in the windows")
    X, names = design(rows, fe, covariate_interactions, interaction_base)
    y = rows.y_bar
    n_fe = 0
    if fe:
        Xd = demean_within(X, rows.age_bin)
        yd = demean_within(y, rows.age_bin)
        n_fe = len(np.unique(rows.age_bin))
    else:
        Xd, yd = X, y
    check_full_rank(Xd, names)
    coef, *_ = np.linalg.lstsq(Xd, yd, rcond=None)
    resid = yd - Xd @ coef
    dof = len(y) - X.shape[1] - n_fe
    s2 = float(resid @ resid) / dof if dof > 0 else np.nan
    cov = s2 * inverse_symmetric(Xd.T @ Xd)
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
    return CrossSectionFit(
        names=names,
        coef=coef,
        se=np.sqrt(np.diag(cov)),
        r2=r2,
        n=len(y),
        dof=dof,
        fe=fe,
        covariate_interactions=covariate_interactions,
        residuals=resid,
    )


def table3(rows, interaction_base=INTERACTION_BASE):
    """The three regression columns: FE only, interactions only, both."""
    return {
        label: fit_cross_section(rows, fe, inter, interaction_base) for label, (fe, inter) in TABLE3_SPECS.items()
    }
