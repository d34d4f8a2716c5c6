import io

import numpy as np
import pytest
from scipy import special

from nldid import _config, data, decision_model as dm, did, probit, synth
from nldid.errors import ConfigurationError, DomainError

Q = len(data.X_COLUMNS)


def _csv(panel):
    buf = io.StringIO()
    data.write_panel_csv(panel, buf)
    return buf.getvalue()


def test_same_seed_same_bytes_and_thread_independent():
    spec = synth.DgpSpec(n_households=9000, seed=3)
    a = synth.generate_probit_panel(spec)
    _config.set_threads(4)
    try:
        b = synth.generate_probit_panel(spec)
    finally:
        _config.set_threads(1)
    assert _csv(a.panel) == _csv(b.panel)
    np.testing.assert_array_equal(a.tau_true, b.tau_true)
    c = synth.generate_probit_panel(synth.DgpSpec(n_households=9000, seed=4))
    assert _csv(a.panel) != _csv(c.panel)


def test_zero_gamma_gives_zero_att():
    k = synth.DEFAULT_KAPPA.copy()
    k[2 : 2 + Q] = 0.0
    sp = synth.generate_probit_panel(synth.DgpSpec(kappa_true=k, n_households=2000, seed=1))
    assert sp.true_att == 0.0
    assert np.all(sp.tau_true[sp.treated] == 0.0)


def test_single_binary_covariate_att_closed_form():
    k = np.zeros(2 + 2 * Q)
    a, b, g0, g1, t0, t1 = -0.3, 0.2, 0.4, 0.5, 0.1, -0.6
    k[0], k[1] = a, b
    k[2], k[3] = g0, g1
    k[2 + Q], k[3 + Q] = t0, t1
    sp = synth.generate_probit_panel(synth.DgpSpec(kappa_true=k, n_households=3000, seed=2))
    panel = sp.panel
    ed = panel.head_educated[panel.child_household[sp.treated]]
    cell = {e: special.ndtr(a + b + g0 + g1 * e + t0 + t1 * e) - special.ndtr(a + b + t0 + t1 * e) for e in (0, 1)}
    expect = (cell[1] * ed.sum() + cell[0] * (~ed).sum()) / ed.size
    assert sp.true_att == pytest.approx(expect, rel=1e-12)
    assert sp.truth["true_att"] == sp.true_att


def test_composition_and_covariate_law():
    sp = synth.generate_probit_panel(synth.DgpSpec(n_households=40_000, seed=5))
    p = sp.panel
    assert p.n_children.min() >= 1
    lam = 3.0
    assert p.n_children.mean() == pytest.approx(lam / (1 - np.exp(-lam)), abs=0.03)
    assert p.head_educated.mean() == pytest.approx(0.35, abs=0.015)
    assert p.low_hwi.mean() == pytest.approx(0.5, abs=0.015)
    assert p.rural.mean() == pytest.approx(0.7, abs=0.015)
    assert np.all((p.head_edu_years > 0) == p.head_educated)
    assert set(np.unique(p.child_age)) == set(range(13, 29))
    np.testing.assert_array_equal(np.bincount(p.religion, minlength=3) > 0, [True, True, True])


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        synth.DgpSpec(kappa_true=np.zeros(3))
    with pytest.raises(ConfigurationError):
        synth.DgpSpec(n_households=0)
    with pytest.raises(ConfigurationError):
        synth.CovariateLaw(religion=(0.5, 0.4, 0.2))
    with pytest.raises(ConfigurationError):
        synth.Composition(post=(13, 20), pre=(19, 28))
    with pytest.raises(ConfigurationError):
        synth.preset("sunny")


def test_pipeline_closure_no_rejects():
    sp = synth.generate_probit_panel(synth.DgpSpec(n_households=3000, seed=8))
    back = data.load_panel_csv(io.StringIO(_csv(sp.panel)))
    assert back.rejects == ()
    sample = data.build_estimation_sample(back)
    eff = did.compute_effects(probit.fit_probit(sample), sample)
    assert len(eff) == int(sp.treated.sum())


@pytest.mark.parametrize("name,target1,target0", [("saturation", 0.76, 0.38), ("conditional", 0.27, 0.08)])
def test_presets_hit_targets(name, target1, target0):
    spec = synth.preset(name)
    assert dm.enrollment_prob(spec, 1) == pytest.approx(target1, abs=1e-12)
    assert dm.enrollment_prob(spec, 0) == pytest.approx(target0, abs=1e-12)


@pytest.mark.parametrize("name", sorted(synth.PRESETS))
def test_decision_panel_frequencies_match_closed_form(name):
    spec = synth.preset(name)
    panel, truth = synth.generate_decision_panel(spec, 60_000, seed=17)
    # first child of each household only: siblings share one draw
    first = np.concatenate([[0], np.cumsum(panel.n_children)[:-1]])
    age = panel.child_age[first]
    female = panel.child_female[first]
    post = (age >= 13) & (age <= 18)
    ed_head = panel.head_educated
    for group in (0, 1):
        sel_k = (ed_head == bool(group)) & ~(post & female)
        sel_0 = (ed_head == bool(group)) & post & female
        for sel, k in ((sel_k, spec.k), (sel_0, 0.0)):
            p = dm.enrollment_prob(spec, group, k)
            share = panel.child_educated[first][sel].mean()
            assert abs(share - p) < 3 * np.sqrt(p * (1 - p) / sel.sum())
    assert truth["tau1"] == pytest.approx(dm.policy_effect(spec, 1))


def test_null_policy_gives_zero_effects():
    spec = synth.preset("saturation")
    panel, truth = synth.generate_decision_panel(spec, 20_000, seed=4, k_post=spec.k)
    assert truth["tau0"] == 0.0 and truth["tau1"] == 0.0
    sample = data.build_estimation_sample(panel)
    eff = did.compute_effects(probit.fit_probit(sample), sample)
    assert abs(eff.tau.mean()) < 0.02


def test_calibration():
    g = dm.Normal(0.0, 1.0)
    loc = synth.calibrate_income_location(g, 0.5, 0.2)
    f = dm.BernoulliNormalMixture(0.5, loc, 1.0)
    assert (1 - f.cdf(0.5)) * (1 - g.cdf(0.5)) == pytest.approx(0.2, abs=1e-12)
    with pytest.raises(DomainError):
        synth.calibrate_income_location(g, 0.5, 0.9)
    with pytest.raises(DomainError):
        synth.calibrate_income_location(g, 0.0, 0.2)
