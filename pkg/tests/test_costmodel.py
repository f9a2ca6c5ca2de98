import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from qspert import costmodel as cm
from qspert.errors import ContractError, DomainError, InfeasibleBudgetError
from reference_values import FIRST_ORDER, SECOND_ORDER, WATER, within_factor

ALPHA = 5 * math.sqrt(2) / 2 * math.e ** 2 / (math.e - 1)


def test_alpha_constant():
    assert cm.ALPHA_RAE == pytest.approx(15.2037, abs=1e-4)


def test_budget_gap_dominant(systems):
    b = cm.split_budget(systems["(H2O)2"])
    assert b.delta0 == b.delta1 == b.delta2 == pytest.approx(3.333e-4, rel=1e-3)


def test_budget_correlation_dominant(systems):
    b = cm.split_budget(systems["pentacene"])
    assert b.delta0 == pytest.approx(0.043 / 0.5 * 1e-3 / 3)
    assert b.delta0 == pytest.approx(2.9e-5, rel=0.02)
    assert b.delta1 == b.delta2 == pytest.approx(1e-3 / 3)


def test_correlation_regime_needs_eps_corr(systems):
    with pytest.raises(ContractError):
        replace(systems["pentacene"], eps_corr=None)


@pytest.mark.parametrize("field,value", [("h1_norm", 0.0), ("overlap_p", 1.5), ("gap_delta", -1.0),
                                         ("molecules_m", 0), ("regime", "other")])
def test_invalid_params(systems, field, value):
    with pytest.raises((DomainError, ContractError)):
        replace(systems["(H2O)2"], **{field: value})


def test_unknown_key_rejected():
    with pytest.raises(ContractError):
        cm.SystemParams.from_dict({"h1_norm": 1, "bogus": 2})


def test_first_order_water_dimer(systems):
    rep = cm.first_order_cost(systems["(H2O)2"])
    ref = FIRST_ORDER["(H2O)2"]
    for key in ("r", "eps_filter", "kappa", "n_filter"):
        assert within_factor(getattr(rep, key), ref[key], 2), key
    assert within_factor(rep.m1_table_ii_mode, ref["m1"], 2)
    assert within_factor(rep.total_first_table_ii_mode, ref["total"], 2)
    # with the 1/delta1 factor the shot count is larger by 1/delta1 = 3000
    assert rep.m1_paper_eq == pytest.approx(rep.m1_table_ii_mode * 3000)


def test_first_order_single_term():
    sp = cm.SystemParams(h1_norm=10, v1_norm=0.5, v23_measure=0.5, gap_delta=0.5,
                         overlap_p=0.9, lv_over_lh=1.0)
    rep = cm.first_order_cost(sp)
    assert rep.m1_paper_eq == pytest.approx(ALPHA * 0.5 / (1e-3 / 3))


def test_first_order_water_hexamer(systems):
    rep = cm.first_order_cost(systems["(H2O)6"])
    assert within_factor(rep.n_filter, 6.8e5, 2)
    assert within_factor(rep.total_first_table_ii_mode, 1.8e14, 2)


def test_second_order_water_dimer(systems):
    rep = cm.second_order_cost(systems["(H2O)2"])
    ref = SECOND_ORDER["(H2O)2"]
    for key in ("r", "eps_filter", "eps_ptb", "n_filter", "n_ptb", "m2"):
        assert within_factor(getattr(rep, key), ref[key], 2), key
    assert within_factor(rep.total_second, ref["total"], 2)


def test_second_order_pentacene(systems):
    rep = cm.second_order_cost(systems["pentacene"])
    assert within_factor(rep.m2, 1.3e22, 3)
    assert within_factor(rep.total_second, 5.0e31, 3)


def test_m2_quadratic_in_v23(systems):
    sp = systems["(H2O)3"]
    a = cm.second_order_cost(sp)
    b = cm.second_order_cost(replace(sp, v1_norm=2 * sp.v1_norm, v23_measure=2 * sp.v23_measure))
    assert b.m2 == pytest.approx(4 * a.m2, rel=1e-12)


def test_perfect_overlap_skips_filter(systems):
    rep = cm.first_order_cost(replace(systems["(H2O)2"], overlap_p=1.0))
    assert rep.n_filter == 0.0 and rep.total_first == 0.0


def test_infeasible_budget(systems):
    sp = replace(systems["(H2O)2"], gap_delta=1e-4)
    with pytest.raises(InfeasibleBudgetError):
        cm.first_order_cost(sp)
    with pytest.raises(InfeasibleBudgetError):
        cm.second_order_cost(sp)


@given(st.floats(1e-5, 1e-2), st.floats(1e-4, 1.0))
def test_infeasible_exactly_when_delta0_reaches_gap(delta, gap):
    sp = cm.SystemParams(h1_norm=100, v1_norm=10, v23_measure=100, gap_delta=gap,
                         overlap_p=0.9, lv_over_lh=2, delta_chem=delta)
    if delta / 3 >= gap:
        with pytest.raises(InfeasibleBudgetError):
            cm.first_order_cost(sp)
    else:
        assert cm.first_order_cost(sp).total_first > 0


@settings(max_examples=30)
@given(st.sampled_from(WATER + ["tetracene", "hexacene"]), st.floats(1e-4, 1e-2))
def test_totals_rederivable(systems, name, delta):
    sp = replace(systems[name], delta_chem=delta)
    for order in ("first", "second"):
        rep = cm.full_cost(sp, order)
        for key, value in cm.rederive(rep).items():
            assert getattr(rep, key) == pytest.approx(value, rel=1e-12)


@settings(max_examples=30)
@given(st.sampled_from(WATER), st.floats(1e-4, 1e-2), st.floats(1.1, 3.0))
def test_monotonicity(systems, name, delta, factor):
    sp = replace(systems[name], delta_chem=delta)
    base = cm.full_cost(sp, "second").total_second
    assert cm.full_cost(replace(sp, delta_chem=delta * factor)).total_second <= base
    assert cm.full_cost(replace(sp, v23_measure=sp.v23_measure * factor)).total_second >= base
    assert cm.full_cost(replace(sp, h1_norm=sp.h1_norm * factor)).total_second >= base
    assert cm.full_cost(replace(sp, gap_delta=sp.gap_delta / factor)).total_second >= base
    b1 = cm.full_cost(sp, "first").total_first
    assert cm.full_cost(replace(sp, delta_chem=delta * factor), "first").total_first <= b1


def _sweep_exponent(systems, field, values):
    sp = systems["(H2O)4"]
    tot = [cm.second_order_cost(replace(sp, **{field: v})).total_second for v in values]
    return np.polyfit(np.log(values), np.log(tot), 1)[0]


def test_scaling_law(systems):
    sp = systems["(H2O)4"]
    # quadratic in v23 exactly, 1/delta2 up to log factors, 1/(gap - delta0)^2
    # since n_filter and n_ptb carry their own 1/kappa
    assert _sweep_exponent(systems, "v23_measure", sp.v23_measure * np.geomspace(1, 10, 5)) == \
        pytest.approx(2.0, rel=1e-9)
    slope_delta = _sweep_exponent(systems, "delta_chem", np.geomspace(1e-3, 1e-2, 5))
    assert slope_delta == pytest.approx(-1.0, rel=0.2)
    slope_gap = _sweep_exponent(systems, "gap_delta", np.geomspace(0.2, 2.0, 5))
    assert slope_gap == pytest.approx(-2.0, rel=0.2)


def test_phase_estimation_hexacene(systems):
    sp = systems["hexacene"]
    pe = cm.phase_estimation_cost(sp)
    want = math.sqrt(2) * math.pi * (3.4e3 + 2.3e4) / (2 * 1e-3) * (1 + 385) / 0.7
    assert pe["baseline_total"] == pytest.approx(want)
    assert within_factor(pe["baseline_total"], 1e10, 5)


def test_phase_estimation_water_by_hand(systems):
    pe = cm.phase_estimation_cost(systems["(H2O)2"])
    want = math.sqrt(2) * math.pi * (204 + 14.3) / 2e-3 * 8.18 / 0.97
    assert pe["baseline_total"] == pytest.approx(want)


@given(st.floats(1e-5, 1.0), st.floats(1.01, 10))
def test_phase_estimation_monotone_in_delta(delta, factor):
    sp = cm.SystemParams(h1_norm=100, v1_norm=10, v23_measure=100, gap_delta=0.3,
                         overlap_p=1.0, lv_over_lh=2, delta_chem=delta)
    a = cm.phase_estimation_cost(sp)["baseline_total"]
    b = cm.phase_estimation_cost(replace(sp, delta_chem=delta * factor))["baseline_total"]
    assert 0 < b < a


def test_t_gate_conversion(systems):
    rep = cm.second_order_cost(replace(systems["(H2O)2"], t_per_call=1e4, l_h=3000))
    assert rep.t_gates["total_second"] == pytest.approx(1e4 * rep.total_second)
    assert rep.ancilla_l == 12


# ---------------------------------------------------------------- shot allocation


def test_rae_examples():
    assert cm.rae_allocation([1.0], 0.1)["total"] == pytest.approx(152.037, abs=1e-3)
    assert cm.rae_allocation([1.0, 1.0], 1.0)["total"] == pytest.approx(ALPHA * 2 ** 1.5)
    with pytest.raises(DomainError):
        cm.rae_allocation([1.0, 0.0], 1.0)


@settings(max_examples=30)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=12), st.floats(1e-3, 1.0))
def test_rae_allocation_meets_variance(weights, delta):
    out = cm.rae_allocation(weights, delta)
    assert cm.achieved_variance(weights, out["per_term"]) == pytest.approx(delta ** 2, rel=1e-9)
    v23 = np.sum(np.abs(weights) ** (2 / 3))
    assert out["total"] == pytest.approx(ALPHA * v23 ** 1.5 / delta, rel=1e-12)


def random_feasible_total(weights, delta, rng):
    """Total shots of a random allocation rescaled to hit the variance target."""
    m = rng.uniform(0.05, 1.0, size=len(weights))
    scale = math.sqrt(cm.achieved_variance(weights, m)) / delta
    return float(np.sum(m * scale))


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=2, max_size=8), st.integers(0, 2 ** 31))
def test_rae_beats_random_allocations(weights, seed):
    rng = np.random.default_rng(seed)
    best = cm.rae_allocation(weights, 0.1)["total"]
    for _ in range(100):
        assert best <= random_feasible_total(weights, 0.1, rng) * (1 + 1e-12)


def numeric_min_total(weights, delta):
    """Minimize sum M subject to the variance constraint with SLSQP."""
    v = np.asarray(weights)
    x0 = np.full(v.size, ALPHA * np.sum(np.abs(v)) / delta)
    cons = {"type": "eq", "fun": lambda m: cm.achieved_variance(v, m) / delta ** 2 - 1.0}
    res = minimize(lambda m: m.sum() / x0.sum(), x0, constraints=[cons], method="SLSQP",
                   bounds=[(1e-9 * x0[0], None)] * v.size, options={"ftol": 1e-15, "maxiter": 2000})
    return float(res.x.sum())


@pytest.mark.parametrize("weights", [[1.0, 2.0], [0.3, 1.0, 5.0], [1, 1, 1, 1], [0.1, 0.5, 2, 3, 7]])
def test_rae_matches_numeric_minimizer(weights):
    closed = cm.rae_allocation(weights, 0.05)["total"]
    assert numeric_min_total(weights, 0.05) == pytest.approx(closed, rel=1e-6)


# ---------------------------------------------------------------- tables


def test_report_tables_header_and_format(systems):
    out = cm.report_tables([systems["(H2O)2"]])
    lines = out["csv"].splitlines()
    assert lines[0] == ("system,r,eps_filter,eps_ptb,kappa,x_th,w,w0,n_filter,n_ptb,m1,m2,"
                        "aa_reps,total_first,total_second,total_pe_baseline")
    cells = lines[1].split(",")
    assert cells[0] == "(H2O)2"
    assert cells[1] == f"{out['json'][0]['r']:.2e}"
    assert cells[10] == "" and cells[13] == ""


def test_report_tables_first_order(systems):
    out = cm.report_tables([systems["(H2O)2"]], order="first")
    cells = out["csv"].splitlines()[1].split(",")
    assert cells[3] == "" and cells[10] != "" and cells[14] == ""


def test_report_tables_empty():
    assert cm.report_tables([])["csv"].count("\n") == 1


def test_report_tables_inline_errors(systems):
    bad = replace(systems["(H2O)2"], gap_delta=1e-4, name="bad")
    out = cm.report_tables([bad, systems["(H2O)3"]])
    lines = out["csv"].splitlines()
    assert lines[1].startswith("bad,error:")
    assert lines[2].startswith("(H2O)3,")
    assert "error" in out["json"][0] and "r" in out["json"][1]
