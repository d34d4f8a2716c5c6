import io

import numpy as np
import pytest

from nldid import data, synth
from nldid.errors import ConfigurationError, EmptyResultError, SchemaError

from conftest import HEADER, household


def _csv(panel):
    buf = io.StringIO()
    data.write_panel_csv(panel, buf, header_comment="schema_version=1")
    return buf.getvalue()


def test_roundtrip_is_exact(tiny_panel):
    text = _csv(tiny_panel)
    assert text.startswith("# schema_version=1\n")
    back = data.load_panel_csv(io.StringIO(text))
    assert back.rejects == ()
    assert _csv(back) == text
    assert list(back.households()) == list(tiny_panel.households())


def test_missing_column_is_schema_error():
    with pytest.raises(SchemaError, match="child_age"):
        data.load_panel_csv(io.StringIO("household_id,rural\nh,1\n"))
    with pytest.raises(SchemaError):
        data.load_panel_csv(io.StringIO(""))


def test_bad_rows_become_rejects_with_line_numbers():
    text = HEADER + (
        "h1,1,0,0,christian,-1,2,c1,14,1,1\n"
        "h1,1,0,0,christian,-1,2,c2,200,1,0\n"  # bad age
        "h2,1,2,0,jedi,0.3,1,c1,15,1,1\n"  # bad religion
        "h3,1,2,0,muslim,0.3,1,c1,15,1,1\n"
        "h3,0,2,0,muslim,0.3,1,c2,15,1,1\n"  # attributes disagree
        "h4,1,2,0,muslim,0.3,1,c1,15,1\n"  # short row
    )
    panel = data.load_panel_csv(io.StringIO(text))
    lines = {r.line: r for r in panel.rejects}
    assert set(lines) == {2, 3, 4, 6, 7}
    # h1 lost a child row so its declared count no longer matches: whole household rejected
    assert "n_children" in lines[2].reason and lines[2].household_id == "h1"
    assert "age" in lines[3].reason
    assert "religion" in lines[4].reason
    assert "differ" in lines[6].reason
    assert list(panel.household_id) == ["h3"]


def test_duplicate_child_id_rejected():
    text = HEADER + "h1,1,0,0,christian,-1,1,c1,14,1,1\nh1,1,0,0,christian,-1,1,c1,15,1,0\n"
    panel = data.load_panel_csv(io.StringIO(text))
    assert [r.line for r in panel.rejects] == [3]
    assert panel.n_child_rows == 1


def test_hwi_computed_from_assets_when_column_absent():
    from nldid import wealth_index as wi

    cols = [c for c in data.PANEL_COLUMNS if c != "hwi"] + list(wi.ASSET_FIELDS)
    rng = np.random.default_rng(0)
    lines = [",".join(cols)]
    for h in range(30):
        assets = [wi.CATEGORICAL_LEVELS[n][rng.integers(len(wi.CATEGORICAL_LEVELS[n]))] for n in wi.CATEGORICAL_LEVELS]
        assets += ["yes" if rng.random() < 0.5 else "no" for _ in wi.YES_NO_FIELDS]
        lines.append(",".join([f"h{h}", "1", "0", "0", "christian", "1", f"h{h}c", "15", "1", "1"] + assets))
    panel = data.load_panel_csv(io.StringIO("\n".join(lines) + "\n"))
    assert panel.n_households == 30
    assert abs(panel.hwi.mean()) < 1e-10
    assert abs(panel.hwi.var() - 1) < 1e-10


def test_panel_arrays_read_only(tiny_panel):
    with pytest.raises(ValueError):
        tiny_panel.child_age[0] = 3


def test_household_record_validation():
    with pytest.raises(ValueError):
        household("x", [(10, True, True)], religion="jedi")
    with pytest.raises(ValueError):
        data.HouseholdRecord("x", 9, False, True, "muslim", 0.0, ())
    with pytest.raises(ValueError):
        data.HouseholdRecord("x", 1, False, True, "muslim", 0.0, (), n_children=2)


def test_check_windows():
    assert data.check_windows((13, 18), (19, 28)) == ((13, 18), (19, 28))
    for post, pre in [((13, 20), (19, 28)), ((18, 13), (19, 28)), ((-1, 5), (19, 28))]:
        with pytest.raises(ConfigurationError):
            data.check_windows(post, pre)


def test_estimation_sample(tiny_panel):
    s = data.build_estimation_sample(tiny_panel)
    # ages 13..28 only: h3's 30-year-old is out
    assert len(s) == 7
    ages = tiny_panel.child_age[s.child_index]
    np.testing.assert_array_equal(s.t, ((ages >= 13) & (ages <= 18)).astype(float))
    female = tiny_panel.child_female[s.child_index]
    rural = tiny_panel.rural[tiny_panel.child_household[s.child_index]]
    np.testing.assert_array_equal(s.g, (female & rural).astype(float))
    np.testing.assert_array_equal(s.w, s.g * s.t)
    assert s.design.shape == (7, len(data.DESIGN_COLUMNS))
    assert s.column_names == data.DESIGN_COLUMNS
    # h1 daughter aged 14 and h2 daughter aged 16 are treated
    assert sorted(s.household_id[s.treated]) == ["h1", "h2"]
    # female-only rule includes the urban daughter aged 30? no: she is outside the windows
    f = data.build_estimation_sample(tiny_panel, group="female")
    assert f.g.sum() == s.g.sum()


def test_covariate_columns(tiny_panel):
    x = data.household_covariates(tiny_panel)
    assert x.shape == (4, 7)
    np.testing.assert_array_equal(x[:, 0], 1.0)
    np.testing.assert_array_equal(x[:, 1], [0, 1, 0, 1])
    np.testing.assert_array_equal(x[:, 2], [1, 0, 0, 0])
    np.testing.assert_array_equal(x[:, 3], [3, 2, 2, 1])
    np.testing.assert_array_equal(x[:, 4], [1, 0, 0, 1])
    np.testing.assert_array_equal(x[:, 5], [0, 1, 0, 0])
    np.testing.assert_array_equal(x[:, 6], [0, 0, 0, 1])


def test_unknown_group_rule(tiny_panel):
    with pytest.raises(ConfigurationError):
        data.build_estimation_sample(tiny_panel, group="urban")


def test_subsample_flag_strictly_older(tiny_panel):
    flagged = data.flag_households_with_noneduc_pretreat_child(tiny_panel, 18)
    np.testing.assert_array_equal(flagged.subsample, [True, True, True, False])
    # h1's non-educated child is 20: a threshold of 20 does not flag it
    f20 = data.flag_households_with_noneduc_pretreat_child(tiny_panel, 20)
    assert not f20.subsample[0]
    sub = flagged.restrict_to_subsample()
    assert list(sub.household_id) == ["h1", "h2", "h3"]
    # input untouched
    assert tiny_panel.subsample is None


def test_mobility_indicators(tiny_panel):
    mob = data.mobility_indicators(tiny_panel)
    # rural daughters: h1 (14 ed, 20 not; head not educated), h2 (16 ed; head educated), h4 (19 ed; head educated)
    d = mob["daughters"]
    assert d["n"] == 4
    assert d["ascending"] == pytest.approx(1 / 4)
    assert d["descending"] == 0.0
    s = mob["sons"]
    # rural sons: h1 25 ed (asc), h2 22 not ed with educated head (desc)
    assert s["n"] == 2 and s["ascending"] == 0.5 and s["descending"] == 0.5 and s["mobility"] == 1.0
    urban = tiny_panel.select_households(~tiny_panel.rural)
    with pytest.raises(EmptyResultError):
        data.mobility_indicators(urban)


def test_saturation_shares(tiny_panel):
    sat = data.saturation_shares(tiny_panel)
    assert sat.educated_head == 1.0 and sat.n_educated_head == 1
    assert sat.non_educated_head == 0.0 and sat.n_non_educated_head == 1
    empty = data.saturation_shares(tiny_panel.select_households(np.array([False, True, False, False])))
    assert empty.educated_head is None and "educated_head" in empty.undefined


def test_summary_table(tiny_panel):
    t = data.summary_table(tiny_panel)
    assert t["households"] == 3
    assert t["n_children"]["mean"] == pytest.approx(2.0)
    assert t["daughters_educated"]["mean"] == pytest.approx(3 / 4)


def test_synthetic_saturation_shares_recovered():
    spec = synth.preset("saturation")
    panel, truth = synth.generate_decision_panel(spec, 40_000, seed=3)
    sat = data.saturation_shares(panel)
    for share, n, target in ((sat.educated_head, sat.n_educated_head, 0.76), (sat.non_educated_head, sat.n_non_educated_head, 0.38)):
        # sisters share one draw, so allow for clustering beyond the binomial se
        se = np.sqrt(target * (1 - target) / n)
        assert abs(share - target) < 4 * se
