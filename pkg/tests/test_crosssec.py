import numpy as np
import pytest

from nldid import crosssec, data
from nldid.data import COVARIATES, HouseholdPanel
from nldid.errors import EmptyResultError, RankDeficiencyError

from conftest import household


def _rows(rng, n, y=None, bins=6):
    x = np.column_stack(
        [
            rng.integers(0, 2, n),
            rng.integers(0, 2, n),
            rng.integers(1, 7, n),
            rng.integers(0, 2, n),
            rng.integers(0, 2, n),
            rng.integers(0, 2, n),
        ]
    ).astype(float)
    # christian and muslim exclusive
    x[:, 4] = np.where(x[:, 3] == 1, 0, x[:, 4])
    avg = rng.uniform(13, 13 + bins, n)
    r = rng.integers(0, 4, n) / 3.0
    return crosssec.CrossSectionRows(
        household_id=np.array([f"h{i}" for i in range(n)], dtype=object),
        y_bar=rng.random(n) if y is None else y,
        r=r,
        x=x,
        avg_age=avg,
        age_bin=np.floor(avg + 0.5).astype(np.int64),
        n_dropped=0,
    )


def test_build_cross_section(tiny_panel):
    rows = crosssec.build_cross_section(tiny_panel)
    # rural households with daughters in 13..28: h1 (14 ed, 20 not), h2 (16 ed), h4 (19 ed)
    assert list(rows.household_id) == ["h1", "h2", "h4"]
    np.testing.assert_allclose(rows.y_bar, [0.5, 1.0, 1.0])
    np.testing.assert_allclose(rows.r, [0.5, 1.0, 0.0])
    np.testing.assert_allclose(rows.avg_age, [17.0, 16.0, 19.0])
    assert rows.n_dropped == 0
    both = crosssec.build_cross_section(tiny_panel, rural_only=False)
    assert "h3" not in both.household_id  # daughter aged 30 is outside the windows


def test_households_without_daughters_counted():
    panel = HouseholdPanel.from_records(
        [household("a", [(14, True, True)]), household("b", [(15, False, True)])]
    )
    rows = crosssec.build_cross_section(panel)
    assert list(rows.household_id) == ["a"] and rows.n_dropped == 1


def _dummy_ols(rows, fe_inter=False):
    X, names = crosssec.design(rows, fe=True, covariate_interactions=fe_inter)
    bins = np.unique(rows.age_bin)
    D = (rows.age_bin[:, None] == bins[None, :]).astype(float)
    coef, *_ = np.linalg.lstsq(np.column_stack([X, D]), rows.y_bar, rcond=None)
    return coef[: X.shape[1]]


def test_fe_absorption_equals_dummy_regression():
    rng = np.random.default_rng(0)
    rows = _rows(rng, 400)
    for inter in (False, True):
        fit = crosssec.fit_cross_section(rows, fe=True, covariate_interactions=inter)
        np.testing.assert_allclose(fit.coef, _dummy_ols(rows, inter), atol=1e-8)


def test_residuals_orthogonal_and_shift_invariance():
    rng = np.random.default_rng(1)
    rows = _rows(rng, 300)
    fit = crosssec.fit_cross_section(rows, fe=True)
    X, _ = crosssec.design(rows, fe=True)
    Xd = crosssec.demean_within(X, rows.age_bin)
    assert np.max(np.abs(Xd.T @ fit.residuals)) < 1e-8
    shifted = crosssec.CrossSectionRows(**{**rows.__dict__, "y_bar": rows.y_bar + 0.25})
    np.testing.assert_allclose(crosssec.fit_cross_section(shifted, fe=True).coef, fit.coef, atol=1e-10)
    nofe = crosssec.fit_cross_section(rows, fe=False)
    nofe_s = crosssec.fit_cross_section(shifted, fe=False)
    assert nofe_s["const"] == pytest.approx(nofe["const"] + 0.25)
    np.testing.assert_allclose(nofe_s.coef[:-2], nofe.coef[:-2], atol=1e-10)


def test_exact_linear_outcome_gives_r2_one():
    rng = np.random.default_rng(2)
    rows = _rows(rng, 100)
    exact = crosssec.CrossSectionRows(**{**rows.__dict__, "y_bar": 0.2 + 0.5 * rows.r})
    fit = crosssec.fit_cross_section(exact, fe=False)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit["R"] == pytest.approx(0.5, abs=1e-10)


def test_fe_only_variation_gives_zero_slopes():
    rng = np.random.default_rng(3)
    rows = _rows(rng, 200)
    y = (rows.age_bin % 3) / 3.0
    fit = crosssec.fit_cross_section(crosssec.CrossSectionRows(**{**rows.__dict__, "y_bar": y}), fe=True)
    np.testing.assert_allclose(fit.coef, 0.0, atol=1e-10)
    assert fit.r2 == pytest.approx(1.0)


def test_synthetic_recovery_within_three_se():
    rng = np.random.default_rng(4)
    rows = _rows(rng, 20_000)
    X, names = crosssec.design(rows, fe=True)
    beta = np.linspace(-0.1, 0.1, X.shape[1])
    fe = {b: 0.02 * b for b in np.unique(rows.age_bin)}
    y = X @ beta + np.array([fe[b] for b in rows.age_bin]) + rng.normal(0, 0.1, len(rows))
    fit = crosssec.fit_cross_section(crosssec.CrossSectionRows(**{**rows.__dict__, "y_bar": y}), fe=True)
    assert fit.names == names
    assert np.all(np.abs(fit.coef - beta) < 3 * fit.se)


def test_table3_columns_and_names():
    rng = np.random.default_rng(5)
    fits = crosssec.table3(_rows(rng, 500))
    assert list(fits) == ["(1)", "(2)", "(3)"]
    for f in fits.values():
        for term in crosssec.TREATMENT_TERMS + crosssec.MAIN_EFFECTS:
            assert term in f.names
    assert "christian:muslim" not in fits["(3)"].names
    assert "educated_head:low_hwi" in fits["(2)"].names
    assert "const" in fits["(2)"].names and "const" not in fits["(1)"].names
    small = crosssec.table3(_rows(rng, 500), interaction_base=("educated_head", "low_hwi"))
    assert small["(3)"].names[-1] == "educated_head:low_hwi"


def test_rank_deficiency_named():
    rng = np.random.default_rng(6)
    rows = _rows(rng, 100)
    x = rows.x.copy()
    x[:, COVARIATES.index("female_head")] = x[:, COVARIATES.index("muslim")]
    bad = crosssec.CrossSectionRows(**{**rows.__dict__, "x": x})
    with pytest.raises(RankDeficiencyError, match="christian|female_head"):
        crosssec.fit_cross_section(bad)


def test_empty_rows():
    panel = HouseholdPanel.from_records([household("a", [(15, False, True)])])
    with pytest.raises(EmptyResultError):
        crosssec.fit_cross_section(crosssec.build_cross_section(panel))
