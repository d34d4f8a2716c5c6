"""Synthetic panels with known ground truth.

``generate_probit_panel`` draws households and children from a covariate law
and sets ``educated = 1{G a + T b + (X W) g + X t + e > 0}`` with standard
normal e, so the true effect of every treated row is known in closed form.

``generate_decision_panel`` draws one (income, value) pair per household from
a :class:`~nldid.decision_model.DecisionModelSpec` and applies the budget
rule: pre-window children and all sons face the cost k, post-window
daughters in rural households face ``k_post`` (0 by default).

Households are generated in fixed-size chunks, each with its own seed spawned
from the master seed, so output depends on the seed alone.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import _config
from .data import DEFAULT_POST, DEFAULT_PRE, DESIGN_COLUMNS, RELIGIONS, HouseholdPanel, check_windows
from .decision_model import (
    BernoulliNormalMixture,
    DecisionModelSpec,
    Normal,
    enrollment_prob,
    policy_effect,
)
from .errors import ConfigurationError, DomainError

CHUNK = 4096
N_KAPPA = len(DESIGN_COLUMNS)

# alpha, beta, gamma (W, W:educated_head, W:low_hwi, W:n_children, W:christian, W:muslim, W:female_head),
# theta (const, educated_head, low_hwi, n_children, christian, muslim, female_head)
DEFAULT_KAPPA = np.array(
    [-0.2, 0.1, 0.35, -0.15, 0.1, -0.03, 0.05, -0.05, 0.05, -0.1, 0.6, -0.35, -0.05, 0.1, -0.1, 0.05],
    dtype=np.float64,
)


@dataclass(frozen=True)
class CovariateLaw:
    """Household covariate frequencies; religion frequencies follow ``RELIGIONS``."""

    educated_head: float = 0.35
    low_hwi: float = 0.5
    female_head: float = 0.15
    religion: tuple = (0.6, 0.3, 0.1)
    mean_children: float = 3.0

    def __post_init__(self):
        for name in ("educated_head", "low_hwi", "female_head"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} frequency must lie in [0, 1]")
        rel = np.asarray(self.religion, dtype=np.float64)
        if rel.shape != (len(RELIGIONS),) or np.any(rel < 0) or abs(rel.sum() - 1.0) > 1e-9:
            raise ConfigurationError("religion frequencies must be 3 non-negative numbers summing to 1")
        if not self.mean_children > 0:
            raise ConfigurationError("mean_children must be positive")


@dataclass(frozen=True)
class Composition:
    """Cohort and gender make-up of the generated children."""

    female_share: float = 0.5
    rural_share: float = 0.7
    post: tuple = DEFAULT_POST
    pre: tuple = DEFAULT_PRE

    def __post_init__(self):
        for name in ("female_share", "rural_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")
        check_windows(self.post, self.pre)

    @property
    def ages(self):
        return np.concatenate(
            [np.arange(self.post[0], self.post[1] + 1), np.arange(self.pre[0], self.pre[1] + 1)]
        )


@dataclass(frozen=True, eq=False)
class DgpSpec:
    kappa_true: np.ndarray = field(default_factory=lambda: DEFAULT_KAPPA.copy())
    covariates: CovariateLaw = CovariateLaw()
    composition: Composition = Composition()
    n_households: int = 10_000
    seed: int = 0

    def __post_init__(self):
        k = np.asarray(self.kappa_true, dtype=np.float64)
        if k.shape != (N_KAPPA,) or not np.all(np.isfinite(k)):
            raise ConfigurationError(f"kappa_true must be {N_KAPPA} finite numbers")
        object.__setattr__(self, "kappa_true", k)
        if self.n_households < 1:
            raise ConfigurationError("n_households must be >= 1")


@dataclass(frozen=True, eq=False)
class SyntheticPanel:
    panel: HouseholdPanel
    tau_true: np.ndarray  # per child row, NaN where the row is not treated
    true_att: float
    truth: dict

    @property
    def treated(self):
        return ~np.isnan(self.tau_true)


def _zt_poisson(rng, lam, size):
    """Poisson(lam) conditioned on >= 1, by inversion of the truncated CDF."""
    u = rng.random(size)
    p0 = np.exp(-lam)
    # P(N <= n | N >= 1) = (F(n) - p0) / (1 - p0)
    target = p0 + u * (1.0 - p0)
    out = np.ones(size, dtype=np.int64)
    cdf = p0 + lam * p0
    pmf = lam * p0
    n = 1
    todo = target > cdf
    while todo.any():
        n += 1
        pmf *= lam / n
        cdf += pmf
        out[todo] = n
        todo &= target > cdf
        if n > 200:
            break
    return out


def _household_chunk(rng, size, law, comp):
    educated = rng.random(size) < law.educated_head
    low = rng.random(size) < law.low_hwi
    female_head = rng.random(size) < law.female_head
    religion = rng.choice(len(RELIGIONS), size=size, p=np.asarray(law.religion)).astype(np.int8)
    rural = rng.random(size) < comp.rural_share
    edu_years = np.where(educated, rng.integers(1, 7, size), 0)
    mag = 0.05 + rng.exponential(1.0, size)
    hwi = np.where(low, -mag, mag)
    n_children = _zt_poisson(rng, law.mean_children, size)
    c = int(n_children.sum())
    child_hh = np.repeat(np.arange(size), n_children)
    ages = comp.ages[rng.integers(0, comp.ages.size, c)]
    female = rng.random(c) < comp.female_share
    return {
        "rural": rural,
        "head_edu_years": edu_years.astype(np.int64),
        "head_female": female_head,
        "religion": religion,
        "hwi": hwi,
        "n_children": n_children,
        "child_household": child_hh,
        "child_age": ages.astype(np.int64),
        "child_female": female,
    }


def _chunks(n, seed):
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    return list(zip(sizes, np.random.SeedSequence(seed).spawn(len(sizes))))


def _run_chunks(fn, jobs):
    threads = _config.get_threads()
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def _assemble(parts, prefix):
    offsets = np.cumsum([0] + [len(p["rural"]) for p in parts])
    cols = {k: np.concatenate([p[k] for p in parts]) for k in parts[0] if k != "child_household"}
    child_hh = np.concatenate([p["child_household"] + off for p, off in zip(parts, offsets[:-1])])
    H = int(offsets[-1])
    hid = np.array([f"{prefix}{i:07d}" for i in range(H)], dtype=object)
    ordinal = np.arange(child_hh.size) - np.repeat(np.cumsum(cols["n_children"]) - cols["n_children"], cols["n_children"])
    child_id = np.array([f"{hid[h]}-{j + 1}" for h, j in zip(child_hh, ordinal)], dtype=object)
    return hid, child_hh, child_id, cols


def _x_rows(cols, child_hh):
    """X_COLUMNS per child row."""
    n = child_hh.size
    rel = cols["religion"][child_hh]
    return np.column_stack(
        [
            np.ones(n),
            (cols["head_edu_years"][child_hh] > 0).astype(float),
            (cols["hwi"][child_hh] <= 0).astype(float),
            cols["n_children"][child_hh].astype(float),
            (rel == RELIGIONS.index("christian")).astype(float),
            (rel == RELIGIONS.index("muslim")).astype(float),
            cols["head_female"][child_hh].astype(float),
        ]
    )


def true_effects(kappa, x):
    """Closed-form tau for treated rows with covariates x."""
    kappa = np.asarray(kappa, dtype=np.float64)
    q = x.shape[1]
    a, b, gam, th = kappa[0], kappa[1], kappa[2 : 2 + q], kappa[2 + q :]
    base = a + b + x @ th
    return special.ndtr(base + x @ gam) - special.ndtr(base)


def generate_probit_panel(spec):
    """Panel from the latent probit model; returns a :class:`SyntheticPanel`."""
    law, comp = spec.covariates, spec.composition

    def chunk(size, ss):
        h_ss, e_ss = ss.spawn(2)
        rng = np.random.default_rng(h_ss)
        part = _household_chunk(rng, size, law, comp)
        part["eps"] = np.random.default_rng(e_ss).standard_normal(part["child_household"].size)
        return part

    parts = _run_chunks(chunk, _chunks(spec.n_households, spec.seed))
    hid, child_hh, child_id, cols = _assemble(parts, "H")
    eps = cols.pop("eps")
    age = cols["child_age"]
    g = (cols["child_female"] & cols["rural"][child_hh]).astype(float)
    t = ((age >= comp.post[0]) & (age <= comp.post[1])).astype(float)
    w = g * t
    x = _x_rows(cols, child_hh)
    k = spec.kappa_true
    q = x.shape[1]
    z = k[0] * g + k[1] * t + (x * w[:, None]) @ k[2 : 2 + q] + x @ k[2 + q :]
    educated = z + eps > 0
    tau = np.full(child_hh.size, np.nan)
    tr = w > 0.5
    tau[tr] = true_effects(k, x[tr])
    att = float(tau[tr].mean()) if tr.any() else float("nan")
    panel = _panel(hid, child_hh, child_id, cols, educated)
    truth = {
        "schema_version": 1,
        "generator": "probit",
        "seed": int(spec.seed),
        "n_households": int(spec.n_households),
        "column_names": list(DESIGN_COLUMNS),
        "kappa_true": [float(v) for v in k],
        "true_att": att,
        "n_treated": int(tr.sum()),
    }
    return SyntheticPanel(panel, tau, att, truth)


def _panel(hid, child_hh, child_id, cols, educated):
    return HouseholdPanel(
        household_id=hid,
        rural=cols["rural"],
        head_edu_years=cols["head_edu_years"],
        head_female=cols["head_female"],
        religion=cols["religion"],
        hwi=cols["hwi"],
        n_children=cols["n_children"],
        child_household=child_hh,
        child_id=child_id,
        child_age=cols["child_age"],
        child_female=cols["child_female"],
        child_educated=np.asarray(educated, dtype=bool),
    )


# --------------------------------------------------------------------------
# decision-model panels
# --------------------------------------------------------------------------


def calibrate_income_location(g, k, target, p=0.5, sd=1.0, lo=-50.0, hi=50.0):
    """Location of a Bernoulli-normal income law giving (1 - F(k))(1 - G(k)) = target."""
    if not k > 0:
        raise DomainError("calibration needs a positive cost k")
    cap = 1.0 - float(g.cdf(k))
    if not 0.0 < target < cap:
        raise DomainError(f"target enrollment {target} must lie in (0, {cap:.6g})")

    def gap(loc):
        return (1.0 - float(BernoulliNormalMixture(p, loc, sd).cdf(k))) * cap - target

    return float(optimize.bisect(gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500))


def _calibrated(k, g0, g1, target0, target1, eta, p=0.5):
    f0 = BernoulliNormalMixture(p, calibrate_income_location(g0, k, target0, p), 1.0)
    f1 = BernoulliNormalMixture(p, calibrate_income_location(g1, k, target1, p), 1.0)
    return DecisionModelSpec(f0=f0, f1=f1, g0=g0, g1=g1, k=k, eta=eta)


def preset_saturation():
    """Educated heads near saturation: pre-policy daughter enrollment 0.76 vs 0.38."""
    return _calibrated(0.2, Normal(0.3, 1.0), Normal(1.0, 1.0), 0.38, 0.76, eta=0.2347)


def preset_conditional():
    """Educated heads far from saturation: pre-policy daughter enrollment 0.27 vs 0.08."""
    return _calibrated(1.0, Normal(0.0, 1.0), Normal(1.0, 1.0), 0.08, 0.27, eta=0.2347)


PRESETS = {"saturation": preset_saturation, "conditional": preset_conditional}


def preset(name):
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name]()


def generate_decision_panel(spec, n_households, seed=0, composition=None, covariates=None, k_post=0.0):
    """Panel whose enrollment follows the budget rule of ``spec``.

    ``spec.eta`` is the share of educated heads; other covariates follow
    ``covariates`` and have no effect on decisions. All households are rural
    unless ``composition`` says otherwise.
    """
    if n_households < 1:
        raise ConfigurationError("n_households must be >= 1")
    if k_post < 0:
        raise DomainError("k_post must be >= 0")
    comp = Composition(rural_share=1.0) if composition is None else composition
    law = CovariateLaw(educated_head=spec.eta) if covariates is None else covariates
    k = spec.k

    def chunk(size, ss):
        h_ss, d_ss = ss.spawn(2)
        part = _household_chunk(np.random.default_rng(h_ss), size, law, comp)
        rng = np.random.default_rng(d_ss)
        ed = part["head_edu_years"] > 0
        y = np.where(ed, spec.f1.sample(rng, size), spec.f0.sample(rng, size))
        b = np.where(ed, spec.g1.sample(rng, size), spec.g0.sample(rng, size))
        part["y"], part["b"] = y, b
        return part

    parts = _run_chunks(chunk, _chunks(n_households, seed))
    hid, child_hh, child_id, cols = _assemble(parts, "D")
    y, b = cols.pop("y")[child_hh], cols.pop("b")[child_hh]
    age = cols["child_age"]
    post = (age >= comp.post[0]) & (age <= comp.post[1])
    policy = post & cols["child_female"] & cols["rural"][child_hh]

    def decide(cost):
        return (y >= cost) & (b >= cost) if cost > 0 else b >= 0.0

    educated = np.where(policy, decide(k_post), decide(k))
    panel = _panel(hid, child_hh, child_id, cols, educated)
    truth = decision_truth(spec, k_post)
    truth.update({"seed": int(seed), "n_households": int(n_households)})
    ed_row = cols["head_edu_years"][child_hh[policy]] > 0
    tau_row = np.where(ed_row, truth["tau1"], truth["tau0"])
    truth["true_att"] = float(tau_row.mean()) if tau_row.size else float("nan")
    truth["n_treated"] = int(policy.sum())
    return panel, truth


def _dist_dict(d):
    if isinstance(d, Normal):
        return {"family": "normal", "mean": d.mean, "sd": d.sd}
    return {"family": "bernoulli_normal_mixture", "p": d.p, "loc": d.loc, "sd": d.sd}


def decision_truth(spec, k_post=0.0):
    """Closed-form enrollment shares and effects implied by a decision spec."""

    def effect(group):
        return enrollment_prob(spec, group, k_post) - enrollment_prob(spec, group, spec.k)

    return {
        "schema_version": 1,
        "generator": "decision",
        "k": spec.k,
        "k_post": float(k_post),
        "eta": spec.eta,
        "f0": _dist_dict(spec.f0),
        "f1": _dist_dict(spec.f1),
        "g0": _dist_dict(spec.g0),
        "g1": _dist_dict(spec.g1),
        "enroll_pre0": enrollment_prob(spec, 0),
        "enroll_pre1": enrollment_prob(spec, 1),
        "tau0": effect(0),
        "tau1": effect(1),
        "tau0_full_policy": policy_effect(spec, 0),
        "tau1_full_policy": policy_effect(spec, 1),
    }
