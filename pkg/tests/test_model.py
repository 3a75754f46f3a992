import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from aoirecruit.io import ConfigError
from aoirecruit.model import (
    Action,
    DegeneratePairError,
    PolicyStructure,
    ScenarioError,
    StructureMismatchError,
    ThresholdPolicy,
    classify_structure,
    cost_effectiveness,
    expected_recruit_cost,
    feasible_mask,
    marginal_cost_effectiveness,
    reduced_feasible_set,
    scenario_from_dict,
    stage_cost,
    strict_ceil,
    structure_is_boundary,
    success_prob,
    threshold_bounds,
    validate_scenario,
)

A = Action


@st.composite
def scenarios(draw):
    p_l = draw(st.floats(0.01, 0.99))
    p_h = draw(st.floats(0.01, 0.99))
    r_l = draw(st.floats(0.01, 0.99))
    r_h = draw(st.floats(r_l, 1.0, exclude_min=True))
    c_l = draw(st.floats(0.1, 9.9))
    c_h = draw(st.floats(c_l, 10.0, exclude_min=True))
    beta = draw(st.floats(1e-4, 0.99))
    return validate_scenario(beta, p_l, c_l, r_l, p_h, c_h, r_h)


# --- validation -------------------------------------------------------------

def test_reference_scenarios_are_valid():
    s = validate_scenario(0.0001, 0.5, 2, 0.6, 0.5, 2.5, 0.7)
    assert s.beta == 0.0001 and s.low.c == 2 and s.high.r == 0.7
    validate_scenario(0.3, 0.5, 2, 0.6, 0.95, 2.5, 0.7)


@pytest.mark.parametrize(
    "args, message",
    [
        ((0.3, 0.5, 3.0, 0.6, 0.95, 2.5, 0.7), "c_L < c_H violated"),
        ((0.3, 0.5, 2.0, 0.8, 0.95, 2.5, 0.7), "r_L < r_H violated"),
        ((1.0, 0.5, 2.0, 0.6, 0.95, 2.5, 0.7), "beta"),
        ((0.0, 0.5, 2.0, 0.6, 0.95, 2.5, 0.7), "beta"),
        ((0.3, 1.0, 2.0, 0.6, 0.95, 2.5, 0.7), "p_L"),
        ((0.3, 0.5, 2.0, 0.6, 0.0, 2.5, 0.7), "p_H"),
        ((0.3, 0.5, -1.0, 0.6, 0.95, 2.5, 0.7), "c_L"),
        ((0.3, 0.5, 2.0, 0.0, 0.95, 2.5, 0.7), "r_L"),
        ((0.3, 0.5, 2.0, 0.6, 0.95, 2.5, 1.5), "r_H"),
    ],
)
def test_validate_rejects_with_named_constraint(args, message):
    with pytest.raises(ScenarioError, match=message):
        validate_scenario(*args)


def test_scenario_json_roundtrip_and_unknown_fields(weighted_scn):
    assert scenario_from_dict(weighted_scn.to_dict()) == weighted_scn
    bad = weighted_scn.to_dict()
    bad["low"]["q"] = 1
    with pytest.raises(ConfigError, match="/low"):
        scenario_from_dict(bad)


def test_replace_revalidates(weighted_scn):
    assert weighted_scn.replace(r_H=0.9).high.r == 0.9
    with pytest.raises(ScenarioError):
        weighted_scn.replace(c_L=5.0)


# --- cost quantities -----------------------------------------------------------

def test_success_prob_examples(base_scn, weighted_scn):
    assert success_prob(base_scn, A.L) == pytest.approx(0.30)
    assert success_prob(base_scn, A.N) == 0
    assert success_prob(weighted_scn, A.N) == 0
    assert success_prob(base_scn, A.B) == pytest.approx(0.545)


def test_expected_recruit_cost_examples(base_scn):
    assert expected_recruit_cost(base_scn, A.L) == pytest.approx(1.0)
    assert expected_recruit_cost(base_scn, A.N) == 0
    assert expected_recruit_cost(base_scn, A.B) == pytest.approx(2.25)


def test_stage_cost_examples(weighted_scn):
    assert stage_cost(weighted_scn, 10, A.N) == pytest.approx(30.0)
    assert stage_cost(weighted_scn, 1, A.N) == pytest.approx(weighted_scn.beta)
    assert stage_cost(weighted_scn, 1, A.B) == pytest.approx(2.43285)
    with pytest.raises(ValueError):
        stage_cost(weighted_scn, 0, A.N)


def test_cost_effectiveness_examples(base_scn):
    assert cost_effectiveness(base_scn, A.L) == pytest.approx(10 / 3, abs=1e-4)
    assert cost_effectiveness(base_scn, A.H) == pytest.approx(3.5714, abs=1e-4)
    assert cost_effectiveness(base_scn, A.B) == pytest.approx(4.1284, abs=1e-4)
    with pytest.raises(ValueError):
        cost_effectiveness(base_scn, A.N)


def test_marginal_cost_effectiveness_examples(base_scn):
    assert marginal_cost_effectiveness(base_scn, A.L, A.H) == pytest.approx(5.0)
    assert marginal_cost_effectiveness(base_scn, A.N, A.L) == pytest.approx(cost_effectiveness(base_scn, A.L))
    g_hb = marginal_cost_effectiveness(base_scn, A.H, A.B)
    assert g_hb == pytest.approx(5.1282, abs=1e-4)
    assert g_hb == pytest.approx(cost_effectiveness(base_scn, A.L) / (1 - success_prob(base_scn, A.H)))


def test_degenerate_pair_is_named():
    # Q_L = Q_H = 0.25
    s = validate_scenario(0.3, 0.5, 1.0, 0.5, 0.25, 2.0, 1.0)
    with pytest.raises(DegeneratePairError, match="degenerate"):
        marginal_cost_effectiveness(s, A.L, A.H)


# --- classification ----------------------------------------------------------

def test_classify_base_is_lh(base_scn):
    assert classify_structure(base_scn) is PolicyStructure.LH
    assert not structure_is_boundary(base_scn)


def test_classify_hl_from_region_diagram_constants():
    # Q_H = 0.49, eta_H = 5.71, Q_L = 0.6, eta_L = 6.5
    r_h, r_l = 0.95, 0.7
    s = validate_scenario(0.3, 0.6 / r_l, 6.5 * r_l, r_l, 0.49 / r_h, 5.71 * r_h, r_h)
    assert success_prob(s, A.H) == pytest.approx(0.49)
    assert cost_effectiveness(s, A.H) == pytest.approx(5.71)
    assert classify_structure(s) is PolicyStructure.HL


def test_classify_unit_ratio_is_none_l():
    s = validate_scenario(0.3, 0.5, 1.0, 0.5, 0.5, 2.0, 1.0)
    assert cost_effectiveness(s, A.L) / cost_effectiveness(s, A.H) == 1.0
    assert classify_structure(s) is PolicyStructure.NoneL


def test_classify_kappa_equality_is_boundary_none_h():
    # Q_L = 0.25, Q_H = 0.5 -> kappa = 2/3; eta_L/eta_H = 2/3 exactly
    s = validate_scenario(0.3, 0.5, 1.0, 0.5, 0.5, 3.0, 1.0)
    assert classify_structure(s) is PolicyStructure.NoneH
    assert structure_is_boundary(s)


def test_structure_orders():
    assert PolicyStructure.LH.order == (A.N, A.L, A.H, A.B)
    assert PolicyStructure.HL.order == (A.N, A.H, A.L, A.B)
    assert PolicyStructure.NoneL.order == (A.N, A.H, A.B)
    assert PolicyStructure.NoneH.order == (A.N, A.L, A.B)


# --- bounds ----------------------------------------------------------------

def test_base_bounds(base_scn):
    b = threshold_bounds(base_scn, PolicyStructure.LH)
    assert b.as_tuple() == (183, 224, 227)
    assert b[A.L] < b[A.H] < b[A.B]


def test_strict_ceiling_on_exact_integer():
    assert strict_ceil(2.0) == 3
    assert strict_ceil(2.5) == 3
    # eta_L = 4, beta = 0.5 -> (1 - beta) eta_L / beta = 4 exactly
    s = validate_scenario(0.5, 0.5, 2.0, 0.5, 0.5, 3.0, 0.6)
    b = threshold_bounds(s)
    assert b[A.L] == 3


def test_bounds_reject_structure_mismatch(base_scn):
    with pytest.raises(StructureMismatchError):
        threshold_bounds(base_scn, PolicyStructure.HL)


# --- reduced feasible sets ---------------------------------------------------

def test_reduced_feasible_set_lh_examples(base_scn):
    b = threshold_bounds(base_scn)
    lh = PolicyStructure.LH
    assert reduced_feasible_set(b, lh, 100) == {A.N, A.L, A.H, A.B}
    assert reduced_feasible_set(b, lh, 300) == {A.B}
    assert reduced_feasible_set(b, lh, 200) == {A.L, A.H, A.B}
    assert reduced_feasible_set(b, lh, 224) == {A.H, A.B}
    assert reduced_feasible_set(b, lh, 227) == {A.B}
    with pytest.raises(ValueError):
        reduced_feasible_set(b, lh, 0)


def test_feasible_mask_matches_sets(base_scn):
    b = threshold_bounds(base_scn)
    mask = feasible_mask(b, 400)
    for d in (1, 182, 183, 223, 224, 226, 227, 400):
        assert {Action(a) for a in np.flatnonzero(mask[d - 1])} == reduced_feasible_set(b, b.structure, d)


# --- threshold policies -------------------------------------------------------

def test_threshold_policy_normalises_and_validates():
    p = ThresholdPolicy("LH", {"B": 6, "L": 3, "H": 5})
    assert list(p.thresholds) == [A.L, A.H, A.B]
    assert [p.action_at(d) for d in range(1, 8)] == [A.N, A.N, A.L, A.L, A.H, A.B, A.B]
    assert ThresholdPolicy.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        ThresholdPolicy("LH", {"L": 5, "H": 3, "B": 6})
    with pytest.raises(ValueError):
        ThresholdPolicy("NoneL", {"L": 2, "B": 6})
    with pytest.raises(ValueError):
        ThresholdPolicy("LH", {"B": 0})


# --- properties ---------------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(scenarios())
def test_probability_ordering(s):
    q = [success_prob(s, a) for a in A]
    assert q[A.N] == 0 <= q[A.L]
    assert q[A.L] < q[A.B] and q[A.H] < q[A.B] < 1


@settings(max_examples=500, deadline=None)
@given(scenarios())
def test_eta_b_at_least_min(s):
    eta = {a: cost_effectiveness(s, a) for a in (A.L, A.H, A.B)}
    assert eta[A.B] >= min(eta[A.L], eta[A.H]) * (1 - 1e-12)


@settings(max_examples=500, deadline=None)
@given(scenarios())
def test_marginal_inequalities(s):
    ql, qh = success_prob(s, A.L), success_prob(s, A.H)
    el, eh = cost_effectiveness(s, A.L), cost_effectiveness(s, A.H)
    assume(abs(ql - qh) > 1e-9 and abs(el - eh) > 1e-9 * eh)
    g = marginal_cost_effectiveness(s, A.L, A.H)
    if ql > qh and el < eh:
        assert g < el
    if qh > ql and el > eh:
        assert g < eh


@settings(max_examples=500, deadline=None)
@given(scenarios())
def test_classification_is_a_partition(s):
    ql, qh = success_prob(s, A.L), success_prob(s, A.H)
    ratio = cost_effectiveness(s, A.L) / cost_effectiveness(s, A.H)
    kappa = (1 - qh) / (1 - ql)
    hits = [
        ql <= qh and kappa < ratio < 1,
        ql > qh and 1 < ratio < kappa,
        ratio >= max(1, kappa),
        ratio < min(1, kappa),
    ]
    st_ = classify_structure(s)
    assert sum(hits) <= 1
    if any(hits):
        assert not structure_is_boundary(s)
        assert st_ is list(PolicyStructure)[hits.index(True)]
    else:
        assert structure_is_boundary(s) and st_ is PolicyStructure.NoneH


@settings(max_examples=300, deadline=None)
@given(scenarios())
def test_bounds_nondecreasing_and_sets_shrink(s):
    b = threshold_bounds(s)
    t = b.as_tuple()
    assert all(x >= 1 for x in t)
    assert list(t) == sorted(t)
    prev = None
    for d in sorted({1, *t, *(x - 1 for x in t if x > 1), t[-1] + 5}):
        cur = reduced_feasible_set(b, b.structure, d)
        assert A.B in cur
        if prev is not None:
            assert cur <= prev
        prev = cur


@settings(max_examples=200, deadline=None)
@given(scenarios(), st.integers(1, 1000))
def test_stage_cost_increasing_and_flattest_for_largest_q(s, d):
    diffs = {}
    for a in A:
        u0, u1 = stage_cost(s, d, a), stage_cost(s, d + 1, a)
        assert u1 > u0
        diffs[a] = u1 - u0
    q = {a: success_prob(s, a) for a in A}
    best = max(q, key=q.get)
    assert diffs[best] == min(diffs.values()) or math.isclose(diffs[best], min(diffs.values()))
