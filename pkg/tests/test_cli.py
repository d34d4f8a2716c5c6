import json

import pytest

from nldid import cli


@pytest.fixture(scope="module")
def sat_panel(tmp_path_factory):
    d = tmp_path_factory.mktemp("sat")
    path = d / "panel.csv"
    assert cli.run(["simulate", "--preset", "saturation", "--seed", "7", "--households", "8000", "--out", str(path)]) == 0
    return path


def test_simulate_writes_panel_and_truth(sat_panel):
    text = sat_panel.read_text()
    assert text.startswith("# schema_version=1\n")
    truth = json.loads((sat_panel.parent / "panel.csv.truth.json").read_text())
    assert truth["schema_version"] == 1 and truth["preset"] == "saturation"
    assert truth["enroll_pre1"] == pytest.approx(0.76)


def test_effects_reports_non_educated_dominance(sat_panel, tmp_path, capsys):
    out = tmp_path / "eff.csv"
    assert cli.run(["effects", "--panel", str(sat_panel), "--out", str(out)]) == 0
    assert "non-educated dominates" in capsys.readouterr().out
    assert out.read_text().startswith("# schema_version=1\nhousehold_id,child_index,tau,se")


def test_estimate_json(sat_panel, tmp_path):
    out = tmp_path / "fit.json"
    assert cli.run(["estimate", "--panel", str(sat_panel), "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    fit = doc["fit"]
    assert {"kappa", "sigma", "loglik", "converged", "n", "column_names"} <= set(fit)
    assert len(fit["kappa"]) == 16 and fit["converged"]


def test_mmi_grid_all_negative_at_p1_09(tmp_path, capsys):
    out = tmp_path / "grid.csv"
    assert cli.run(["mmi-grid", "--p1", "0.9", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "mu,p1,tau0,tau1,f,sign"
    signs = [int(line.split(",")[-1]) for line in lines[2:]]
    assert len(signs) == 61 and all(s == -1 for s in signs)
    assert "all negative" in capsys.readouterr().out


def test_rank_deficient_fixture_exits_2(tmp_path, capsys):
    rows = ["household_id,rural,head_edu_years,head_female,religion,hwi,n_children,child_id,child_age,child_female,child_educated"]
    kids = [(14, 1), (20, 1), (15, 0), (22, 0)]
    for h in range(40):
        n = 2 + h % 3
        rel = "christian" if h % 4 < 2 else "muslim"
        for c, (age, female) in enumerate(kids[:n]):
            ed = (h + c) % 2
            rows.append(f"h{h},1,{h % 3},{h % 2},{rel},{(h % 5) - 2.5},{n},c{c},{age},{female},{ed}")
    path = tmp_path / "rank.csv"
    path.write_text("\n".join(rows) + "\n")
    assert cli.run(["estimate", "--panel", str(path)]) == 2
    err = capsys.readouterr().err
    # christian + muslim = 1: the later dummy is named
    assert "'W:muslim' is collinear" in err


def test_validation_errors_exit_1(tmp_path, capsys):
    assert cli.run(["estimate", "--panel", str(tmp_path / "missing.csv")]) == 1
    assert cli.run(["mmi-grid", "--bogus"]) == 1
    assert cli.run(["effects", "--panel", "x.csv", "--q", "1.5"]) == 1
    assert cli.run(["estimate", "--panel", "x.csv", "--post", "13-20"]) == 1
    assert cli.run(["mmi-grid", "--p1", "1.4"]) == 1
    assert cli.run(["simulate", "--preset", "saturation"]) == 1
    assert cli.run(["nonsense"]) == 1
    err = capsys.readouterr().err
    assert "--q" in err and "overlaps" in err


def test_schema_error_exit_1(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("household_id,rural\nh1,1\n")
    assert cli.run(["describe", "--panel", str(path)]) == 1


def test_describe_does_not_touch_input(sat_panel, tmp_path):
    before = sat_panel.read_bytes()
    out = tmp_path / "d.json"
    assert cli.run(["describe", "--panel", str(sat_panel), "--format", "json", "--out", str(out)]) == 0
    assert sat_panel.read_bytes() == before
    doc = json.loads(out.read_text())
    assert doc["saturation"]["educated_head"] == pytest.approx(0.76, abs=0.03)
    assert set(doc["mobility"]) == {"sons", "daughters"}


def test_data_to_stdout_without_out(capsys):
    assert cli.run(["mmi-sim", "--preset", "conditional", "--n", "20000"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# schema_version=1\ngroup,tau_closed_form")


def test_hwi_subcommand(tmp_path):
    from nldid import wealth_index as wi
    import numpy as np

    rng = np.random.default_rng(0)
    lines = ["household_id," + ",".join(wi.ASSET_FIELDS)]
    for h in range(50):
        cats = [wi.CATEGORICAL_LEVELS[n][rng.integers(len(wi.CATEGORICAL_LEVELS[n]))] for n in wi.CATEGORICAL_LEVELS]
        flags = ["yes" if rng.random() < 0.5 else "no" for _ in wi.YES_NO_FIELDS]
        lines.append(",".join([f"h{h}"] + cats + flags))
    lines.append("bad," + ",".join(["marble"] + ["none", "none"] + ["no"] * len(wi.YES_NO_FIELDS)))
    src = tmp_path / "assets.csv"
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "hwi.json"
    assert cli.run(["hwi", "--assets", str(src), "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["households"]) == 50
    assert doc["rejects"] == [{"household_id": "bad", "reason": "flooring=marble"}]


def test_placebo_and_crosssec(tmp_path):
    panel = tmp_path / "old.csv"
    # probit generator covers ages 13..28 only, so placebo windows need their own panel
    assert cli.run(["simulate", "--generator", "probit", "--households", "3000", "--seed", "2", "--out", str(panel)]) == 0
    assert cli.run(["crosssec", "--panel", str(panel), "--out", str(tmp_path / "cs.csv")]) == 0
    text = (tmp_path / "cs.csv").read_text()
    assert "(1),R," in text and "(3),educated_head:low_hwi," in text
    assert cli.run(["placebo", "--panel", str(panel)]) == 1  # no children above 28
