import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from almostmin.currents import GraphSheet, unit_ball_volume
from almostmin.examples import FlatFamily, SingleSheetFamily, build_single_sheet
from almostmin.exceptions import SpecError
from almostmin.verify import (BallCampaign, BallSpec, _fit, dumps_json, singular_mass_report,
                              stratified_centers, to_jsonable, verify_bombieri_form,
                              verify_competitor, verify_dirichlet_bound, verify_excess_decay)


@pytest.fixture(scope="module")
def power_report():
    fam = build_single_sheet(m=2, alpha=0.5, c=0.1)
    camp = BallCampaign.dyadic(fam, 3, 8, strata={"singular": 1, "random": 1}, seed=3,
                               competitor=False)
    return camp, verify_excess_decay(camp)


# ---------------------------------------------------------------------------
# serialization


def test_to_jsonable_maps_nonfinite_to_null():
    obj = {"a": np.float64("nan"), "b": [np.inf, -np.inf, 1.5], "c": np.arange(3),
           "d": np.bool_(True), 4: (np.int32(2),)}
    out = to_jsonable(obj)
    assert out == {"a": None, "b": [None, None, 1.5], "c": [0, 1, 2], "d": True, "4": [2]}
    text = dumps_json(obj)
    assert text.endswith("\n") and json.loads(text)["a"] is None


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.text(max_size=5), st.floats(allow_nan=True, allow_infinity=True),
                       max_size=8))
def test_dumps_json_is_order_independent(d):
    rev = dict(reversed(list(d.items())))
    assert dumps_json(d) == dumps_json(rev)
    for v in json.loads(dumps_json(d)).values():
        assert v is None or math.isfinite(v)


# ---------------------------------------------------------------------------
# fits


def test_fit_recovers_power_law():
    radii = 2.0 ** -np.arange(3, 10)
    out = _fit(radii, 0.7 * radii ** 3.0)
    assert out["slope"] == pytest.approx(3.0, abs=1e-12)
    assert out["intercept"] == pytest.approx(np.log(0.7), abs=1e-12)
    assert out["r2"] == pytest.approx(1.0) and out["stable"]


def test_fit_flags_unstable_largest_radius():
    radii = 2.0 ** -np.arange(3, 9)
    v = radii ** 3.0
    v[0] *= 20.0
    out = _fit(radii, v)
    assert not out["stable"]


def test_fit_zero_signal_skipped():
    radii = 2.0 ** -np.arange(3, 9)
    v = np.zeros(radii.size)
    v[:3] = 1.0
    out = _fit(radii, v)
    assert out["slope"] is None and out["n_radii"] == 3 and "zero signal" in out["note"]


# ---------------------------------------------------------------------------
# campaigns


def test_campaign_validation():
    fam = FlatFamily()
    for collar in (0.0, 0.5, 0.8):
        with pytest.raises(SpecError):
            BallCampaign(fam, [BallSpec((0.0, 0.0), 0.1)], collar=collar)
    with pytest.raises(SpecError):
        BallCampaign(fam, [BallSpec((0.0, 0.0), -0.1)])
    with pytest.raises(SpecError):
        BallCampaign.dyadic(fam, 5, 3)
    camp = BallCampaign.dyadic(fam, 3, 6)
    assert camp.radii == [2.0 ** -j for j in range(3, 7)]
    assert camp.gated == ("random",)


def test_stratified_centers_single_sheet():
    fam = build_single_sheet()
    cs = stratified_centers(fam, {"singular": 1, "random": 4}, 0.1, 0)
    assert [s for s, _ in cs] == ["singular"] + ["random"] * 4
    assert np.all(cs[0][1] == 0)


def test_flat_family_zero_signal():
    camp = BallCampaign.dyadic(FlatFamily(Q=2), 3, 7, seed=1)
    rep = verify_excess_decay(camp)
    assert all(b["excess"] == 0.0 for b in rep.balls)
    assert rep.fit["slope"] is None and rep.passes["slope"] is None
    assert rep.passes["per_ball"] and rep.passes["mass_lower_bound"] and rep.passed
    assert rep.constants["C0"] == 0.0


def test_power_sheet_slope(power_report):
    camp, rep = power_report
    # f = c |x|^{3/2}: excess ~ r^{2 + 2 alpha} = r^3
    assert camp.exponent == 3.0
    assert rep.fit["slope"] == pytest.approx(3.0, abs=0.1)
    assert rep.passes["slope"] and rep.passes["per_ball"]
    assert rep.passes["C0_extrapolation"]


def test_report_excess_matches_mass(power_report):
    _, rep = power_report
    for b in rep.balls:
        expect = b["mass"] - b["q"] * unit_ball_volume(2) * b["r"] ** 2
        assert b["excess"] == pytest.approx(expect, abs=1e-12)


def test_report_schema(power_report):
    _, rep = power_report
    d = json.loads(rep.to_json())
    for key in ("family_meta", "balls", "fit", "constants", "passes", "passed"):
        assert key in d
    for key in ("center", "r", "case", "q", "mass", "excess", "dirichlet", "competitor_gap",
                "pass"):
        assert key in d["balls"][0]
    assert {"slope", "intercept", "r2"} <= set(d["fit"])
    assert {"C0", "C4", "kappa", "Cbar"} <= set(d["constants"])


def test_reports_are_deterministic():
    fam = build_single_sheet(m=2, alpha=0.5, c=0.1)
    runs = []
    for _ in range(2):
        camp = BallCampaign.dyadic(fam, 3, 5, strata={"singular": 1, "random": 1}, seed=7)
        runs.append(verify_excess_decay(camp).to_json())
    assert runs[0] == runs[1]
    camp = BallCampaign.dyadic(fam, 3, 5, strata={"singular": 1, "random": 1}, seed=8)
    assert verify_excess_decay(camp).to_json() != runs[0]


def test_failed_ball_recorded_and_campaign_continues():
    # a ball far outside the sheet's domain of reparametrization fails, others proceed
    fam = build_single_sheet(m=2, alpha=0.5, c=0.1)
    balls = [BallSpec((0.0, 0.0), 0.1, "singular"), BallSpec((0.0, 0.0), 0.5, "singular")]
    rep = verify_excess_decay(BallCampaign(fam, balls, R0=0.25))
    assert rep.balls[1]["failure"].startswith("skipped")
    assert rep.extra["skipped"][0]["r"] == 0.5
    assert rep.balls[0]["excess"] > 0


def test_competitor_affine_sheet_gap_zero():
    fam = SingleSheetFamily(GraphSheet.affine([[0.2, -0.1]], [0.3]), 1.0)
    camp = BallCampaign.dyadic(fam, 3, 5, strata={"singular": 1, "random": 2})
    rep = verify_competitor(camp)
    assert all(abs(b["competitor_gap"]) < 1e-12 for b in rep.balls)
    assert rep.passes["competitor"]
    with pytest.raises(SpecError):
        verify_competitor(camp, collar=0.5)


def test_competitor_gap_bounded_power_sheet():
    fam = build_single_sheet(m=2, alpha=0.5, c=0.1)
    camp = BallCampaign.dyadic(fam, 3, 6, strata={"singular": 1, "random": 1})
    rep = verify_competitor(camp)
    assert rep.passes["competitor"]
    for b in rep.balls:
        assert b["competitor_gap"] <= b["excess"] + 10 * b["error"]


def test_bombieri_flat_and_skip():
    fam = FlatFamily()
    balls = [BallSpec((0.0, 0.0), 0.1), BallSpec((0.0, 0.0), 1.0)]
    rep = verify_bombieri_form(BallCampaign(fam, balls, R0=0.25))
    assert rep.passes["bombieri"] and rep.constants["C"] == 0.0
    assert len(rep.extra["skipped"]) == 1


def test_bombieri_constant_comparable_to_C0(power_report):
    camp, rep = power_report
    bom = verify_bombieri_form(camp)
    assert bom.passes["bombieri"]
    ref = bom.constants["C0_over_q_omega"]
    assert 0.5 * ref <= bom.constants["C"] <= 1.5 * ref


def test_dirichlet_bound_statuses():
    flat = FlatFamily()
    out = verify_dirichlet_bound(flat, (0.0, 0.0), 0.3, alpha=0.5)
    assert out["lhs"] == 0.0 and out["status"] == "pass"
    aff = SingleSheetFamily(GraphSheet.affine([[0.3, 0.0]]), 0.5)
    out = verify_dirichlet_bound(aff, (0.0, 0.0), 0.1, caps={"C1": 0.1})
    assert out["C1"] > 0.1 and out["status"] == "hypothesis_failure" and not out["pass"]
    out = verify_dirichlet_bound(aff, (0.0, 0.0), 0.1)
    assert out["status"] == "pass"
    pw = build_single_sheet()
    out = verify_dirichlet_bound(pw, (0.1, 0.0), 0.2)
    assert out["status"] == "pass" and out["lhs"] <= out["rhs"]


def test_singular_mass_report_flags():
    out = singular_mass_report((0.5, 0.25), N=4)
    assert [row["eps"] for row in out["rows"]] == [0.5, 0.25]
    assert out["monotone"] and out["consistent"]
    assert all(0 < row["ratio"] <= 1 for row in out["rows"])
