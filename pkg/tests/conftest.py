import numpy as np
import pytest

from nldid.data import ChildRecord, HouseholdPanel, HouseholdRecord

HEADER = "household_id,rural,head_edu_years,head_female,religion,hwi,n_children,child_id,child_age,child_female,child_educated\n"


def household(hid, kids, edu=0, rural=True, female_head=False, religion="christian", hwi=-0.5):
    children = tuple(ChildRecord(f"{hid}-{i}", age, female, educated) for i, (age, female, educated) in enumerate(kids))
    return HouseholdRecord(hid, edu, female_head, rural, religion, hwi, children)


@pytest.fixture
def tiny_panel():
    recs = [
        household("h1", [(14, True, True), (20, True, False), (25, False, True)], edu=0, hwi=-1.0),
        household("h2", [(16, True, True), (22, False, False)], edu=3, hwi=0.5, religion="muslim"),
        household("h3", [(30, True, False), (13, False, True)], edu=0, rural=False, hwi=0.2, religion="other"),
        household("h4", [(19, True, True)], edu=6, female_head=True, hwi=1.5),
    ]
    return HouseholdPanel.from_records(recs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
