"""Household panel ingestion, estimation-sample construction and descriptives.

The panel is stored column-wise: household attributes in arrays of length H,
child attributes in arrays of length C with ``child_household`` pointing into
the household arrays. Record views (:class:`HouseholdRecord`) are built on
demand.

Panel CSV (one row per child, household attributes repeated)::

    household_id, rural, head_edu_years, head_female, religion, hwi,
    n_children, child_id, child_age, child_female, child_educated

``hwi`` may be omitted when the asset columns of
:mod:`nldid.wealth_index` are present; the index is then computed on load.
Lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import wealth_index
from .errors import ConfigurationError, EmptyResultError, SchemaError

RELIGIONS = ("christian", "muslim", "other")
COVARIATES = ("educated_head", "low_hwi", "n_children", "christian", "muslim", "female_head")
X_COLUMNS = ("const",) + COVARIATES
XW_COLUMNS = tuple("W" if c == "const" else f"W:{c}" for c in X_COLUMNS)
DESIGN_COLUMNS = ("G", "T") + XW_COLUMNS + X_COLUMNS

PANEL_COLUMNS = (
    "household_id",
    "rural",
    "head_edu_years",
    "head_female",
    "religion",
    "hwi",
    "n_children",
    "child_id",
    "child_age",
    "child_female",
    "child_educated",
)
MANDATORY_COLUMNS = tuple(c for c in PANEL_COLUMNS if c != "hwi")
HOUSEHOLD_FIELDS = ("rural", "head_edu_years", "head_female", "religion", "hwi", "n_children")

DEFAULT_POST = (13, 18)
DEFAULT_PRE = (19, 28)
GROUP_RULES = ("rural_female", "female")


@dataclass(frozen=True)
class ChildRecord:
    child_id: str
    age_years: int
    female: bool
    educated: bool

    def __post_init__(self):
        if not 0 <= int(self.age_years) <= 120:
            raise ValueError(f"child age {self.age_years} outside [0, 120]")


@dataclass(frozen=True)
class HouseholdRecord:
    household_id: str
    head_edu_years: int
    head_female: bool
    rural: bool
    religion: str
    hwi: float
    children: tuple = ()
    n_children: int | None = None

    def __post_init__(self):
        if self.religion not in RELIGIONS:
            raise ValueError(f"unknown religion {self.religion!r}")
        if not 0 <= int(self.head_edu_years) <= 6:
            raise ValueError("head_edu_years must lie in 0..6")
        object.__setattr__(self, "children", tuple(self.children))
        if self.n_children is None:
            object.__setattr__(self, "n_children", len(self.children))
        elif self.n_children != len(self.children):
            raise ValueError(f"n_children={self.n_children} but {len(self.children)} children given")


@dataclass(frozen=True)
class Reject:
    line: int
    reason: str
    household_id: str | None = None


@dataclass(frozen=True, eq=False)
class HouseholdPanel:
    household_id: np.ndarray
    rural: np.ndarray
    head_edu_years: np.ndarray
    head_female: np.ndarray
    religion: np.ndarray  # codes into RELIGIONS
    hwi: np.ndarray
    n_children: np.ndarray
    child_household: np.ndarray
    child_id: np.ndarray
    child_age: np.ndarray
    child_female: np.ndarray
    child_educated: np.ndarray
    subsample: np.ndarray | None = None
    rejects: tuple = field(default=())

    def __post_init__(self):
        for name in ("household_id", "rural", "head_edu_years", "head_female", "religion", "hwi", "n_children"):
            arr = getattr(self, name)
            arr.setflags(write=False)
            if len(arr) != len(self.household_id):
                raise ValueError(f"household column {name} has wrong length")
        for name in ("child_household", "child_id", "child_age", "child_female", "child_educated"):
            arr = getattr(self, name)
            arr.setflags(write=False)
            if len(arr) != len(self.child_household):
                raise ValueError(f"child column {name} has wrong length")
        counts = np.bincount(self.child_household, minlength=self.n_households)
        if not np.array_equal(counts, self.n_children):
            raise ValueError("n_children must equal the number of child rows per household")

    @property
    def n_households(self):
        return len(self.household_id)

    @property
    def n_child_rows(self):
        return len(self.child_household)

    @property
    def head_educated(self):
        return self.head_edu_years > 0

    @property
    def low_hwi(self):
        return wealth_index.dichotomize(self.hwi)

    @classmethod
    def empty(cls):
        return cls.from_records([])

    @classmethod
    def from_records(cls, records, rejects=()):
        records = list(records)
        hh_child = []
        kids = []
        for h, rec in enumerate(records):
            for c in rec.children:
                hh_child.append(h)
                kids.append(c)
        return cls(
            household_id=np.array([str(r.household_id) for r in records], dtype=object),
            rural=np.array([bool(r.rural) for r in records], dtype=bool),
            head_edu_years=np.array([int(r.head_edu_years) for r in records], dtype=np.int64),
            head_female=np.array([bool(r.head_female) for r in records], dtype=bool),
            religion=np.array([RELIGIONS.index(r.religion) for r in records], dtype=np.int8),
            hwi=np.array([float(r.hwi) for r in records], dtype=np.float64),
            n_children=np.array([len(r.children) for r in records], dtype=np.int64),
            child_household=np.array(hh_child, dtype=np.int64),
            child_id=np.array([str(c.child_id) for c in kids], dtype=object),
            child_age=np.array([int(c.age_years) for c in kids], dtype=np.int64),
            child_female=np.array([bool(c.female) for c in kids], dtype=bool),
            child_educated=np.array([bool(c.educated) for c in kids], dtype=bool),
            rejects=tuple(rejects),
        )

    def households(self):
        order = np.argsort(self.child_household, kind="stable")
        starts = np.concatenate([[0], np.cumsum(self.n_children)])
        for h in range(self.n_households):
            idx = order[starts[h] : starts[h + 1]]
            kids = tuple(
                ChildRecord(
                    str(self.child_id[i]),
                    int(self.child_age[i]),
                    bool(self.child_female[i]),
                    bool(self.child_educated[i]),
                )
                for i in idx
            )
            yield HouseholdRecord(
                household_id=str(self.household_id[h]),
                head_edu_years=int(self.head_edu_years[h]),
                head_female=bool(self.head_female[h]),
                rural=bool(self.rural[h]),
                religion=RELIGIONS[self.religion[h]],
                hwi=float(self.hwi[h]),
                children=kids,
            )

    def with_subsample(self, flag):
        flag = np.asarray(flag, dtype=bool)
        if flag.shape != (self.n_households,):
            raise ValueError("subsample flag must have one entry per household")
        return _replace(self, subsample=flag.copy())

    def select_households(self, mask):
        """Sub-panel restricted to households where ``mask`` is true."""
        mask = np.asarray(mask, dtype=bool)
        new_index = np.cumsum(mask) - 1
        keep_child = mask[self.child_household]
        return HouseholdPanel(
            household_id=self.household_id[mask],
            rural=self.rural[mask],
            head_edu_years=self.head_edu_years[mask],
            head_female=self.head_female[mask],
            religion=self.religion[mask],
            hwi=self.hwi[mask],
            n_children=self.n_children[mask],
            child_household=new_index[self.child_household[keep_child]],
            child_id=self.child_id[keep_child],
            child_age=self.child_age[keep_child],
            child_female=self.child_female[keep_child],
            child_educated=self.child_educated[keep_child],
            subsample=None if self.subsample is None else self.subsample[mask],
            rejects=self.rejects,
        )

    def restrict_to_subsample(self):
        if self.subsample is None:
            raise ConfigurationError("panel carries no subsample flag")
        return self.select_households(self.subsample)


def _replace(panel, **changes):
    kwargs = {name: getattr(panel, name) for name in panel.__dataclass_fields__}
    kwargs.update(changes)
    return HouseholdPanel(**kwargs)


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------


def _flag(text):
    if text == "1":
        return True
    if text == "0":
        return False
    raise ValueError(f"expected 0/1, got {text!r}")


def _int_in(text, lo, hi, name):
    value = int(text)
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
    return value


def load_panel_csv(stream):
    """Read the panel CSV. Malformed rows become :class:`Reject` entries.

    A missing mandatory column raises :class:`SchemaError`. A household whose
    rows disagree on household attributes keeps its first row's values and
    rejects the disagreeing rows; a household whose ``n_children`` differs
    from its number of accepted child rows is rejected as a whole.
    """
    lines = ((i, line) for i, line in enumerate(stream, start=1) if not line.startswith("#"))
    numbered = list(lines)
    reader = csv.reader(line for _, line in numbered)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("panel file has no header row") from None
    missing = [c for c in MANDATORY_COLUMNS if c not in header]
    has_hwi = "hwi" in header
    has_assets = all(c in header for c in wealth_index.ASSET_FIELDS)
    if not has_hwi and not has_assets:
        missing.append("hwi (or the asset columns)")
    if missing:
        raise SchemaError(f"panel file is missing columns: {', '.join(missing)}")
    col = {name: header.index(name) for name in header}

    rejects = []
    households = {}  # household_id -> dict
    order = []
    for (lineno, _), cells in zip(numbered[1:], reader):
        if not cells or all(not c.strip() for c in cells):
            continue
        if len(cells) != len(header):
            rejects.append(Reject(lineno, f"expected {len(header)} cells, got {len(cells)}"))
            continue
        cell = {name: cells[j].strip() for name, j in col.items()}
        hid = cell["household_id"]
        try:
            if not hid:
                raise ValueError("empty household_id")
            attrs = {
                "rural": _flag(cell["rural"]),
                "head_edu_years": _int_in(cell["head_edu_years"], 0, 6, "head_edu_years"),
                "head_female": _flag(cell["head_female"]),
                "religion": cell["religion"].lower(),
                "n_children": _int_in(cell["n_children"], 0, 10**6, "n_children"),
            }
            if attrs["religion"] not in RELIGIONS:
                raise ValueError(f"unknown religion {cell['religion']!r}")
            if has_hwi:
                attrs["hwi"] = float(cell["hwi"])
                if not np.isfinite(attrs["hwi"]):
                    raise ValueError("hwi must be finite")
            else:
                attrs["assets"] = {f: cell[f] for f in wealth_index.ASSET_FIELDS}
            if not cell["child_educated"]:
                raise ValueError("missing child_educated")
            child = ChildRecord(
                child_id=cell["child_id"],
                age_years=_int_in(cell["child_age"], 0, 120, "child_age"),
                female=_flag(cell["child_female"]),
                educated=_flag(cell["child_educated"]),
            )
        except ValueError as exc:
            rejects.append(Reject(lineno, str(exc), hid or None))
            continue
        entry = households.get(hid)
        if entry is None:
            entry = {"attrs": attrs, "children": [], "lines": []}
            households[hid] = entry
            order.append(hid)
        elif entry["attrs"] != attrs:
            rejects.append(Reject(lineno, "household attributes differ from earlier rows", hid))
            continue
        if any(c.child_id == child.child_id for c in entry["children"]):
            rejects.append(Reject(lineno, f"duplicate child_id {child.child_id!r}", hid))
            continue
        entry["children"].append(child)
        entry["lines"].append(lineno)

    accepted = []
    for hid in order:
        entry = households[hid]
        declared = entry["attrs"]["n_children"]
        if declared != len(entry["children"]):
            for ln in entry["lines"]:
                rejects.append(
                    Reject(ln, f"n_children={declared} but {len(entry['children'])} child rows", hid)
                )
            continue
        accepted.append(hid)

    if not has_hwi and accepted:
        recs = [dict(households[h]["attrs"]["assets"], household_id=h) for h in accepted]
        assets = wealth_index.expand_indicators(recs)
        bad = {h: label for h, label in assets.rejects}
        for h in bad:
            for ln in households[h]["lines"]:
                rejects.append(Reject(ln, f"unknown asset level {bad[h]}", h))
        accepted = [h for h in accepted if h not in bad]
        scores = wealth_index.first_factor_index(assets) if accepted else []
        for h, s in zip(accepted, scores):
            households[h]["attrs"]["hwi"] = float(s)

    records = []
    for hid in accepted:
        a = households[hid]["attrs"]
        records.append(
            HouseholdRecord(
                household_id=hid,
                head_edu_years=a["head_edu_years"],
                head_female=a["head_female"],
                rural=a["rural"],
                religion=a["religion"],
                hwi=a["hwi"],
                children=households[hid]["children"],
            )
        )
    rejects.sort(key=lambda r: r.line)
    return HouseholdPanel.from_records(records, rejects)


def write_panel_csv(panel, stream, header_comment=None):
    """Write ``panel`` in the panel CSV schema (hwi column included)."""
    if header_comment:
        stream.write(f"# {header_comment}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(PANEL_COLUMNS)
    h = panel.child_household
    rel = np.array(RELIGIONS, dtype=object)[panel.religion]
    for i in range(panel.n_child_rows):
        k = h[i]
        writer.writerow(
            (
                panel.household_id[k],
                int(panel.rural[k]),
                int(panel.head_edu_years[k]),
                int(panel.head_female[k]),
                rel[k],
                repr(float(panel.hwi[k])),
                int(panel.n_children[k]),
                panel.child_id[i],
                int(panel.child_age[i]),
                int(panel.child_female[i]),
                int(panel.child_educated[i]),
            )
        )


# --------------------------------------------------------------------------
# estimation sample
# --------------------------------------------------------------------------


def _check_window(win, name):
    lo, hi = (int(v) for v in win)
    if lo < 0 or hi < lo:
        raise ConfigurationError(f"{name} window must satisfy 0 <= min <= max, got {lo}..{hi}")
    return lo, hi


def check_windows(post, pre):
    post = _check_window(post, "post")
    pre = _check_window(pre, "pre")
    if post[0] <= pre[1] and pre[0] <= post[1]:
        raise ConfigurationError(f"post window {post[0]}-{post[1]} overlaps pre window {pre[0]}-{pre[1]}")
    return post, pre


@dataclass(frozen=True, eq=False)
class EstimationSample:
    """Design rows for the probit DiD: one row per child inside the windows.

    ``x`` columns follow ``X_COLUMNS`` (intercept first); ``xw = x * w``.
    """

    y: np.ndarray
    g: np.ndarray
    t: np.ndarray
    w: np.ndarray
    x: np.ndarray
    xw: np.ndarray
    household_id: np.ndarray
    child_index: np.ndarray
    post: tuple
    pre: tuple
    group: str
    column_names: tuple = DESIGN_COLUMNS

    def __post_init__(self):
        if not np.array_equal(self.w, self.g * self.t):
            raise ValueError("w must equal g*t")
        if not np.array_equal(self.xw, self.x * self.w[:, None]):
            raise ValueError("xw must equal x scaled by w")

    def __len__(self):
        return len(self.y)

    @property
    def design(self):
        return np.column_stack([self.g, self.t, self.xw, self.x])

    @property
    def treated(self):
        return self.w > 0.5

    @property
    def head_educated(self):
        return self.x[:, X_COLUMNS.index("educated_head")] > 0.5

    @property
    def low_hwi(self):
        return self.x[:, X_COLUMNS.index("low_hwi")] > 0.5


def household_covariates(panel):
    """H x 7 matrix of X_COLUMNS per household."""
    return np.column_stack(
        [
            np.ones(panel.n_households),
            panel.head_educated.astype(float),
            panel.low_hwi.astype(float),
            panel.n_children.astype(float),
            (panel.religion == RELIGIONS.index("christian")).astype(float),
            (panel.religion == RELIGIONS.index("muslim")).astype(float),
            panel.head_female.astype(float),
        ]
    )


def group_indicator(panel, rule, child_rows=None):
    if rule not in GROUP_RULES:
        raise ConfigurationError(f"unknown group rule {rule!r}; choose from {', '.join(GROUP_RULES)}")
    idx = np.arange(panel.n_child_rows) if child_rows is None else child_rows
    female = panel.child_female[idx]
    if rule == "female":
        return female
    return female & panel.rural[panel.child_household[idx]]


def build_estimation_sample(panel, post=DEFAULT_POST, pre=DEFAULT_PRE, group="rural_female"):
    """Children inside the post or pre age window, with G, T, W, X and X*W."""
    post, pre = check_windows(post, pre)
    age = panel.child_age
    in_post = (age >= post[0]) & (age <= post[1])
    in_pre = (age >= pre[0]) & (age <= pre[1])
    rows = np.flatnonzero(in_post | in_pre)
    hh = panel.child_household[rows]
    g = group_indicator(panel, group, rows).astype(np.float64)
    t = in_post[rows].astype(np.float64)
    w = g * t
    x = household_covariates(panel)[hh]
    return EstimationSample(
        y=panel.child_educated[rows].astype(np.float64),
        g=g,
        t=t,
        w=w,
        x=x,
        xw=x * w[:, None],
        household_id=panel.household_id[hh],
        child_index=rows,
        post=post,
        pre=pre,
        group=group,
    )


def flag_households_with_noneduc_pretreat_child(panel, age_threshold=18):
    """Flag households with a non-educated child strictly older than the threshold."""
    if age_threshold < 0:
        raise ConfigurationError("age threshold must be >= 0")
    hit = (~panel.child_educated) & (panel.child_age > age_threshold)
    flag = np.bincount(panel.child_household[hit], minlength=panel.n_households) > 0
    return panel.with_subsample(flag)


# --------------------------------------------------------------------------
# descriptives
# --------------------------------------------------------------------------


def _share(mask, total):
    n = int(total.sum())
    return None if n == 0 else float((mask & total).sum()) / n


def mobility_indicators(panel, ages=None):
    """Intergenerational mobility at indicator granularity, rural households, by child gender.

    ascending: child educated, head not; descending: head educated, child not.
    """
    rural_child = panel.rural[panel.child_household]
    if ages is not None:
        lo, hi = _check_window(ages, "mobility")
        rural_child = rural_child & (panel.child_age >= lo) & (panel.child_age <= hi)
    if not rural_child.any():
        raise EmptyResultError("no children in rural households")
    head_ed = panel.head_educated[panel.child_household]
    child_ed = panel.child_educated
    out = {}
    for label, sel in (("sons", ~panel.child_female), ("daughters", panel.child_female)):
        base = rural_child & sel
        asc = _share(child_ed & ~head_ed, base)
        desc = _share(~child_ed & head_ed, base)
        out[label] = {
            "mobility": None if asc is None else asc + desc,
            "ascending": asc,
            "descending": desc,
            "n": int(base.sum()),
        }
    return out


@dataclass(frozen=True)
class SaturationShares:
    educated_head: float | None
    non_educated_head: float | None
    n_educated_head: int
    n_non_educated_head: int

    @property
    def undefined(self):
        return tuple(
            name
            for name, v in (("educated_head", self.educated_head), ("non_educated_head", self.non_educated_head))
            if v is None
        )


def saturation_shares(panel, pre=DEFAULT_PRE):
    """P(daughter educated | head educated / not) over pre-window daughters in rural households."""
    lo, hi = _check_window(pre, "pre")
    hh = panel.child_household
    base = panel.child_female & panel.rural[hh] & (panel.child_age >= lo) & (panel.child_age <= hi)
    head_ed = panel.head_educated[hh]
    ed = base & head_ed
    ne = base & ~head_ed
    return SaturationShares(
        educated_head=_share(panel.child_educated, ed),
        non_educated_head=_share(panel.child_educated, ne),
        n_educated_head=int(ed.sum()),
        n_non_educated_head=int(ne.sum()),
    )


def _stats(values):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return {"mean": None, "median": None, "sd": None, "min": None, "max": None, "n": 0}
    return {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "sd": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "min": float(values.min()),
        "max": float(values.max()),
        "n": int(values.size),
    }


def summary_table(panel, rural_only=True):
    """Descriptive statistics shaped like the usual household summary table."""
    hmask = panel.rural if rural_only else np.ones(panel.n_households, dtype=bool)
    cmask = hmask[panel.child_household]
    return {
        "head_edu_years": _stats(panel.head_edu_years[hmask]),
        "daughters_educated": _stats(panel.child_educated[cmask & panel.child_female]),
        "sons_educated": _stats(panel.child_educated[cmask & ~panel.child_female]),
        "hwi": _stats(panel.hwi[hmask]),
        "n_children": _stats(panel.n_children[hmask]),
        "households": int(hmask.sum()),
    }
