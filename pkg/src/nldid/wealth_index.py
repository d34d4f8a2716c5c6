"""Household wealth index from asset and utility indicators.

Categorical asset fields are expanded into one 0/1 column per level, the
columns are standardised, and the household score is the projection on the
leading eigenvector of the column correlation matrix, rescaled to mean 0 and
variance 1 (population variance). Households with a score <= 0 are "low".
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SchemaError, SingularMatrixError

# levels ordered poorer -> wealthier
CATEGORICAL_LEVELS = {
    "flooring": ("earth", "cement", "wood", "tile"),
    "water": ("none", "public-piped", "piped-outside", "piped-inside"),
    "sanitation": ("none", "latrine", "flush"),
}
YES_NO_FIELDS = (
    "electricity",
    "television",
    "refrigerator",
    "internet",
    "telephone",
    "computer",
    "automobile",
)
ASSET_FIELDS = tuple(CATEGORICAL_LEVELS) + YES_NO_FIELDS

INDICATOR_COLUMNS = tuple(
    [f"{name}={level}" for name, levels in CATEGORICAL_LEVELS.items() for level in levels]
    + list(YES_NO_FIELDS)
)

_YES = {"yes", "y", "1", "true"}
_NO = {"no", "n", "0", "false"}


@dataclass(frozen=True)
class AssetMatrix:
    values: np.ndarray
    columns: tuple
    household_id: np.ndarray
    rejects: tuple = ()


@dataclass(frozen=True)
class FirstFactor:
    scores: np.ndarray
    loadings: np.ndarray
    eigenvalue: float
    columns: tuple
    dropped: tuple = field(default=())


def _yes_no(value):
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    text = str(value).strip().lower()
    if text in _YES:
        return 1
    if text in _NO:
        return 0
    return None


def expand_indicators(records):
    """Turn raw asset records (mappings) into a 0/1 indicator matrix.

    Each record needs ``household_id`` plus every field in ``ASSET_FIELDS``.
    A record with an unknown level is rejected as ``(household_id, label)``
    and left out of the matrix.
    """
    rows, ids, rejects = [], [], []
    for rec in records:
        hid = str(rec.get("household_id", ""))
        row = []
        bad = None
        for name, levels in CATEGORICAL_LEVELS.items():
            value = str(rec.get(name, "")).strip().lower()
            if value not in levels:
                bad = f"{name}={value}"
                break
            row.extend(1 if value == level else 0 for level in levels)
        if bad is None:
            for name in YES_NO_FIELDS:
                flag = _yes_no(rec.get(name, ""))
                if flag is None:
                    bad = f"{name}={rec.get(name, '')}"
                    break
                row.append(flag)
        if bad is not None:
            rejects.append((hid, bad))
            continue
        rows.append(row)
        ids.append(hid)
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(INDICATOR_COLUMNS))
    return AssetMatrix(values, INDICATOR_COLUMNS, np.array(ids, dtype=object), tuple(rejects))


def jacobi_eigh(a, tol=1e-15, max_sweeps=100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted by decreasing eigenvalue,
    eigenvectors in columns.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = math.sqrt(max(0.0, np.sum(a * a) - np.sum(np.diag(a) ** 2)))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                d = a[q, q] - a[p, p]
                if abs(d) > 1e100 * abs(apq):
                    # theta^2 would overflow; t ~ 1 / (2 theta)
                    t = apq / d
                else:
                    theta = d / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def fit_first_factor(m, columns=None, anchor="electricity"):
    """Leading principal component of the indicator correlation matrix.

    Constant columns are dropped with a warning. The sign is chosen so the
    loading on ``anchor`` (or on the first kept column when the anchor is
    absent) is non-negative.
    """
    if isinstance(m, AssetMatrix):
        columns = m.columns
        m = m.values
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DomainError("asset matrix must be two-dimensional")
    if columns is None:
        columns = tuple(f"c{j}" for j in range(m.shape[1]))
    columns = tuple(columns)
    if m.shape[0] < 3:
        raise DomainError("need at least 3 households")
    sd = m.std(axis=0)
    keep = sd > 0
    dropped = tuple(c for c, k in zip(columns, keep) if not k)
    if dropped:
        warnings.warn(f"dropping constant indicator columns: {', '.join(dropped)}", stacklevel=2)
    if keep.sum() < 2:
        raise DomainError("need at least 2 non-constant indicator columns")
    kept = tuple(c for c, k in zip(columns, keep) if k)
    z = (m[:, keep] - m[:, keep].mean(axis=0)) / sd[keep]
    corr = (z.T @ z) / z.shape[0]
    corr = 0.5 * (corr + corr.T)
    evals, evecs = jacobi_eigh(corr)
    if not np.all(np.isfinite(evals)) or evals[0] - evals[1] <= 1e-10 * max(evals[0], 1.0):
        raise SingularMatrixError("leading eigenvalue of the correlation matrix is not separated", pivot=0)
    load = evecs[:, 0]
    ref = kept.index(anchor) if anchor in kept else 0
    if load[ref] < 0:
        load = -load
    raw = z @ load
    scores = (raw - raw.mean()) / raw.std()
    return FirstFactor(scores, load, float(evals[0]), kept, dropped)


def first_factor_index(m, columns=None, anchor="electricity"):
    """Standardised first-factor wealth score per household."""
    return fit_first_factor(m, columns, anchor).scores


def dichotomize(hwi):
    """Low-wealth flag: score <= 0."""
    return np.asarray(hwi, dtype=np.float64) <= 0.0


def read_asset_records(stream):
    reader = csv.DictReader(line for line in stream if not line.startswith("#"))
    header = reader.fieldnames or []
    missing = [c for c in ("household_id",) + ASSET_FIELDS if c not in header]
    if missing:
        raise SchemaError(f"asset file is missing columns: {', '.join(missing)}")
    return list(reader)


def load_assets_csv(stream):
    return expand_indicators(read_asset_records(stream))
