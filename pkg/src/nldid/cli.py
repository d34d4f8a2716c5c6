"""Command-line front end: ``nldid <subcommand> [options]``.

Exit status is 0 on success, 1 on invalid input or configuration and 2 on
numerical failure. Data go to ``--out`` (or stdout when it is omitted); a
short human summary goes to stdout when ``--out`` is given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings

import numpy as np

from . import _config, crosssec, data, decision_model, did, probit, synth, wealth_index
from .errors import ConfigurationError, NldidError, NumericalError, ValidationError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------


def _window(text):
    try:
        lo, hi = (int(v) for v in text.split("-"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like LO-HI, got {text!r}") from None
    return lo, hi


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else None
    return v


class Output:
    """Collects the primary artifact, then writes it as CSV or JSON."""

    def __init__(self, args):
        self.path = args.out
        self.format = args.format
        self.summary = []

    def say(self, line):
        self.summary.append(line)

    def emit(self, header, rows, payload):
        if self.format == "json":
            body = json.dumps(_jsonable({"schema_version": SCHEMA_VERSION, **payload}), indent=2, sort_keys=True) + "\n"
        else:
            buf = io.StringIO()
            buf.write(f"# schema_version={SCHEMA_VERSION}\n")
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
            body = buf.getvalue()
        if self.path:
            with open(self.path, "w", encoding="utf-8", newline="") as fh:
                fh.write(body)
            for line in self.summary:
                print(line)
        else:
            sys.stdout.write(body)


def _read_panel(args):
    with open(args.panel, encoding="utf-8", newline="") as fh:
        panel = data.load_panel_csv(fh)
    if panel.rejects:
        print(f"warning: {len(panel.rejects)} panel rows rejected", file=sys.stderr)
    if getattr(args, "subsample", "none") == "noneduc-older":
        panel = data.flag_households_with_noneduc_pretreat_child(panel, args.age_threshold).restrict_to_subsample()
    return panel


def _sample(args, panel):
    return data.build_estimation_sample(panel, post=args.post, pre=args.pre, group=args.group)


def _fit(args, panel):
    sample = _sample(args, panel)
    fit = probit.fit_probit(sample, max_iter=args.max_iter, tol=args.tol)
    if not fit.converged:
        raise NumericalError(f"probit did not converge in {fit.iterations} iterations (score norm {fit.score_norm:.3g})")
    return sample, fit


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_hwi(args, out):
    with open(args.assets, encoding="utf-8", newline="") as fh:
        m = wealth_index.load_assets_csv(fh)
    ff = wealth_index.fit_first_factor(m)
    low = wealth_index.dichotomize(ff.scores)
    rows = [(h, s, l) for h, s, l in zip(m.household_id, ff.scores, low)]
    out.say(f"households: {len(rows)}  rejected rows: {len(m.rejects)}  low-hwi share: {low.mean():.4f}")
    out.say(f"leading eigenvalue: {ff.eigenvalue:.6g}  dropped columns: {', '.join(ff.dropped) or 'none'}")
    out.emit(
        ("household_id", "hwi", "low_hwi"),
        rows,
        {
            "households": [{"household_id": h, "hwi": s, "low_hwi": l} for h, s, l in rows],
            "loadings": dict(zip(ff.columns, ff.loadings)),
            "eigenvalue": ff.eigenvalue,
            "dropped": list(ff.dropped),
            "rejects": [{"household_id": h, "reason": r} for h, r in m.rejects],
        },
    )


def cmd_estimate(args, out):
    panel = _read_panel(args)
    sample, fit = _fit(args, panel)
    lo, hi = probit.wald_ci(fit)
    rows = list(zip(fit.column_names, fit.kappa, fit.se, fit.z, fit.p_values, lo, hi))
    out.say(f"rows: {fit.n}  treated: {int(sample.treated.sum())}  iterations: {fit.iterations}  loglik: {fit.loglik:.6f}")
    out.emit(("term", "coef", "se", "z", "p", "ci_lo", "ci_hi"), rows, {"fit": fit.to_dict()})


def cmd_effects(args, out):
    panel = _read_panel(args)
    sample, fit = _fit(args, panel)
    eff = did.compute_effects(fit, sample, q=args.q)
    summ = did.summarize(eff)
    verdict = did.subgroup_cdf(eff, "head_educated").verdict
    out.say(f"treated rows: {len(eff)}  significant (BH q={args.q}): {summ['n_significant']}")
    for key in ("all", "head_non_educated", "head_educated", "low_hwi", "high_hwi"):
        v = summ[key]
        out.say(f"average effect [{key}]: {'n/a' if v is None else f'{v:.6f}'}")
    out.say(f"CDF dominance by head education: {verdict}")
    rows = zip(
        eff.household_id, eff.child_index, eff.tau, eff.se, eff.t_stat, eff.p_raw, eff.p_adj,
        eff.significant, eff.head_educated, eff.low_hwi,
    )
    header = ("household_id", "child_index", "tau", "se", "t", "p_raw", "p_adj", "significant", "head_educated", "low_hwi")
    rows = list(rows)
    out.emit(
        header,
        rows,
        {"summary": summ, "dominance": verdict, "effects": [dict(zip(header, r)) for r in rows], "fit": fit.to_dict()},
    )


def cmd_cdf(args, out):
    panel = _read_panel(args)
    sample, fit = _fit(args, panel)
    eff = did.compute_effects(fit, sample, q=args.q)
    if args.significant_only:
        eff = eff.subset(eff.significant)
    res = did.subgroup_cdf(eff, args.by)
    out.say(f"grouping: {args.by}  verdict: {res.verdict}")
    rows = [(label, v, f) for label in res.labels for v, f in zip(*res.tables[label])]
    out.emit(
        ("group", "tau", "ecdf"),
        rows,
        {
            "grouping": args.by,
            "verdict": res.verdict,
            "relation": res.relation,
            "groups": {label: {"tau": res.tables[label][0], "ecdf": res.tables[label][1]} for label in res.labels},
        },
    )


def cmd_placebo(args, out):
    panel = _read_panel(args)
    cols = did.placebo_run(panel, args.thresholds, args.start_age, args.pre_span, args.group)
    rows = []
    for c in cols:
        n_sig = sum(t["p_raw"] < 0.05 for t in c.terms)
        out.say(f"threshold {c.threshold}: post {c.post[0]}-{c.post[1]} pre {c.pre[0]}-{c.pre[1]} n={c.fit.n} "
                f"interaction terms significant at 5%: {n_sig}/{len(c.terms)}")
        for t in c.terms:
            rows.append((c.threshold, t["name"], t["coef"], t["se"], t["z"], t["p_raw"], t["p_adj"]))
    out.emit(("threshold", "term", "coef", "se", "z", "p_raw", "p_adj"), rows, did.placebo_to_dict(cols))


def cmd_crosssec(args, out):
    panel = _read_panel(args)
    rows_cs = crosssec.build_cross_section(panel, args.post, args.pre, rural_only=not args.all_households)
    fits = crosssec.table3(rows_cs)
    rows = []
    for label, f in fits.items():
        out.say(f"column {label}: n={f.n} r2={f.r2:.4f} R={f['R']:.6f}")
        rows.extend((label, name, c, s) for name, c, s in zip(f.names, f.coef, f.se))
    out.emit(
        ("column", "term", "coef", "se"),
        rows,
        {"columns": {k: f.to_dict() for k, f in fits.items()}, "households_dropped": rows_cs.n_dropped},
    )


def cmd_mmi_grid(args, out):
    mu = decision_model.mu_grid(args.mu_lo, args.mu_hi, args.mu_step)
    g = decision_model.effect_gap_grid(mu, args.p1, k=args.k, p0=args.p0)
    rows = list(g.rows())
    for i, p in enumerate(g.p1):
        s = g.sign[i]
        state = "all negative" if np.all(s < 0) else "all positive" if np.all(s > 0) else "mixed"
        out.say(f"p1={p:g}: f {state} (min {g.f[i].min():.6f}, max {g.f[i].max():.6f})")
    out.emit(
        ("mu", "p1", "tau0", "tau1", "f", "sign"),
        rows,
        {"k": g.k, "p0": g.p0, "tau0": g.tau0, "cells": [dict(zip(("mu", "p1", "tau0", "tau1", "f", "sign"), r)) for r in rows]},
    )


def _decision_spec(args):
    if args.preset:
        return synth.preset(args.preset)
    return decision_model.DecisionModelSpec.parametric(args.mu, args.p1, k=args.k, p0=args.p0)


def cmd_mmi_sim(args, out):
    spec = _decision_spec(args)
    rows, payload = [], {"groups": {}}
    for gi, label in enumerate(decision_model.GROUPS):
        cf = decision_model.policy_effect(spec, gi)
        mc = decision_model.mc_simulate(spec, gi, n=args.n, seed=[args.seed, gi])
        z = (mc.tau_hat - cf) / mc.se if mc.se > 0 else 0.0
        out.say(f"{label}: closed form {cf:.6f}  monte carlo {mc.tau_hat:.6f} (se {mc.se:.2e}, z {z:.2f})")
        rows.append((label, cf, mc.tau_hat, mc.se, mc.enroll_k, mc.enroll_0, mc.n))
        payload["groups"][label] = {"closed_form": cf, **mc._asdict()}
    payload["k"] = spec.k
    out.emit(("group", "tau_closed_form", "tau_mc", "se_mc", "enroll_k", "enroll_0", "n"), rows, payload)


def cmd_simulate(args, out):
    if args.generator == "probit":
        comp = synth.Composition(post=args.post, pre=args.pre)
        spec = synth.DgpSpec(n_households=args.households, seed=args.seed, composition=comp)
        sp = synth.generate_probit_panel(spec)
        panel, truth = sp.panel, sp.truth
    else:
        spec = synth.preset(args.preset) if args.preset else decision_model.DecisionModelSpec.parametric(
            args.mu, args.p1, k=args.k, p0=args.p0
        )
        comp = synth.Composition(rural_share=1.0, post=args.post, pre=args.pre)
        panel, truth = synth.generate_decision_panel(
            spec, args.households, seed=args.seed, composition=comp, k_post=args.k_post
        )
        if args.preset:
            truth["preset"] = args.preset
    if not args.out:
        raise ConfigurationError("--out is required for simulate")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        data.write_panel_csv(panel, fh, header_comment=f"schema_version={SCHEMA_VERSION}")
    truth_path = args.truth or args.out + ".truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(_jsonable(truth), indent=2, sort_keys=True) + "\n")
    print(f"households: {panel.n_households}  child rows: {panel.n_child_rows}  true ATT: {truth['true_att']:.6f}")
    print(f"truth written to {truth_path}")


def cmd_describe(args, out):
    panel = _read_panel(args)
    table = data.summary_table(panel, rural_only=not args.all_households)
    sat = data.saturation_shares(panel, args.pre)
    mob = data.mobility_indicators(panel)
    rows = [("summary", k, stat, v[stat]) for k, v in table.items() if isinstance(v, dict) for stat in v]
    rows.append(("summary", "households", "n", table["households"]))
    rows += [("saturation", name, "share", getattr(sat, name)) for name in ("educated_head", "non_educated_head")]
    rows += [("mobility", who, stat, v) for who, d in mob.items() for stat, v in d.items()]
    for name in sat.undefined:
        out.say(f"saturation share for {name} is undefined (no pre-window daughters)")
    out.say(f"households: {table['households']}  saturation educated/non-educated: {_fmt(sat.educated_head)} / {_fmt(sat.non_educated_head)}")
    out.emit(
        ("section", "variable", "statistic", "value"),
        rows,
        {"summary": table, "saturation": sat.__dict__, "mobility": mob, "rejects": len(panel.rejects)},
    )


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _common(p):
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_positive_int, help="worker cap (default: NLDID_THREADS or 1)")
    p.add_argument("--seed", type=int, default=0)


def _panel_opts(p, fit=True):
    p.add_argument("--panel", required=True, help="panel CSV")
    p.add_argument("--post", type=_window, default=data.DEFAULT_POST, help="post-policy ages LO-HI")
    p.add_argument("--pre", type=_window, default=data.DEFAULT_PRE, help="pre-policy ages LO-HI")
    p.add_argument("--group", choices=data.GROUP_RULES, default="rural_female")
    p.add_argument("--subsample", choices=("none", "noneduc-older"), default="none")
    p.add_argument("--age-threshold", type=int, default=18)
    if fit:
        p.add_argument("--max-iter", type=_positive_int, default=100)
        p.add_argument("--tol", type=float, default=1e-8)


def _decision_opts(p):
    p.add_argument("--preset", choices=tuple(synth.PRESETS))
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--p1", type=float, default=0.5)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--k", type=float, default=0.1)


def build_parser():
    ap = _Parser(prog="nldid", description="Nonlinear difference-in-differences toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("hwi", help="wealth index from asset indicators")
    p.add_argument("--assets", required=True)
    _common(p)
    p.set_defaults(func=cmd_hwi)

    p = sub.add_parser("estimate", help="probit DiD fit")
    _panel_opts(p)
    _common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("effects", help="effects on the treated with BH-adjusted tests")
    _panel_opts(p)
    p.add_argument("--q", type=float, default=did.DEFAULT_Q)
    _common(p)
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("cdf", help="subgroup effect CDFs and dominance")
    _panel_opts(p)
    p.add_argument("--q", type=float, default=did.DEFAULT_Q)
    p.add_argument("--by", choices=tuple(did.GROUPINGS), default="head_educated")
    p.add_argument("--significant-only", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("placebo", help="re-estimation on unexposed cohorts")
    _panel_opts(p)
    p.add_argument("--thresholds", type=_int_list, default=list(did.PLACEBO_THRESHOLDS))
    p.add_argument("--start-age", type=int, default=29)
    p.add_argument("--pre-span", type=_positive_int, default=10)
    _common(p)
    p.set_defaults(func=cmd_placebo)

    p = sub.add_parser("crosssec", help="household-level share regression")
    _panel_opts(p, fit=False)
    p.add_argument("--all-households", action="store_true", help="include urban households")
    _common(p)
    p.set_defaults(func=cmd_crosssec)

    p = sub.add_parser("mmi-grid", help="sign of tau1 - tau0 over (mu, p1)")
    p.add_argument("--p1", type=_float_list, default=[0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--k", type=float, default=0.1)
    p.add_argument("--mu-lo", type=float, default=0.0)
    p.add_argument("--mu-hi", type=float, default=3.0)
    p.add_argument("--mu-step", type=float, default=0.05)
    _common(p)
    p.set_defaults(func=cmd_mmi_grid)

    p = sub.add_parser("mmi-sim", help="closed-form vs Monte Carlo policy effects")
    _decision_opts(p)
    p.add_argument("--n", type=_positive_int, default=1_000_000)
    _common(p)
    p.set_defaults(func=cmd_mmi_sim)

    p = sub.add_parser("simulate", help="write a synthetic panel and its truth sidecar")
    p.add_argument("--generator", choices=("probit", "decision"), default="decision")
    _decision_opts(p)
    p.add_argument("--households", type=_positive_int, default=20_000)
    p.add_argument("--k-post", type=float, default=0.0)
    p.add_argument("--post", type=_window, default=data.DEFAULT_POST, help="post-policy ages LO-HI")
    p.add_argument("--pre", type=_window, default=data.DEFAULT_PRE, help="pre-policy ages LO-HI")
    p.add_argument("--truth", help="truth sidecar path (default: OUT.truth.json)")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("describe", help="summary table, saturation shares and mobility")
    p.add_argument("--panel", required=True)
    p.add_argument("--pre", type=_window, default=data.DEFAULT_PRE)
    p.add_argument("--all-households", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_describe)
    return ap


def _validate(args):
    if getattr(args, "q", None) is not None and not 0.0 < args.q < 1.0:
        raise ConfigurationError(f"--q must lie in (0, 1), got {args.q}")
    if getattr(args, "mu_step", None) is not None and not args.mu_step > 0:
        raise ConfigurationError("--mu-step must be positive")
    if getattr(args, "mu_lo", None) is not None and args.mu_hi < args.mu_lo:
        raise ConfigurationError("--mu-hi must be >= --mu-lo")
    if args.command == "mmi-grid" and (not args.p1 or any(not 0 <= p <= 1 for p in args.p1)):
        raise ConfigurationError("--p1 values must lie in [0, 1]")
    if getattr(args, "post", None) is not None and getattr(args, "pre", None) is not None:
        data.check_windows(args.post, args.pre)


def run(argv=None):
    """Parse ``argv`` and run one subcommand; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        if args.threads is not None:
            _config.set_threads(args.threads)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args, Output(args))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NldidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
