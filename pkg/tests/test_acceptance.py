"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import itertools
import math
import time

import numpy as np
import pytest

from qspert import chebpoly as cp
from qspert import costmodel as cm
from qspert import pauli, sim
from reference_values import (FIRST_ORDER, PE_BASELINE_HEXACENE, POLYACENES, SECOND_ORDER, WATER,
                              within_factor)
from test_costmodel import numeric_min_total, random_feasible_total


def _misses(rows, refs, keys, factor, total_key):
    out = []
    for name, rep in rows.items():
        for key in keys:
            got = getattr(rep, total_key if key == "total" else key)
            if not within_factor(got, refs[name][key], factor):
                out.append(f"{name}.{key}={got:.2e} vs {refs[name][key]:.1e}")
    return out


def test_criterion_1_second_order_water(systems, report_criterion):
    t0 = time.perf_counter()
    rows = {n: cm.second_order_cost(systems[n]) for n in WATER}
    elapsed = time.perf_counter() - t0
    keys = ("r", "eps_filter", "eps_ptb", "n_filter", "n_ptb", "m2", "total")
    misses = _misses(rows, SECOND_ORDER, keys, 2.0, "total_second")
    worst = max(max(getattr(r, "total_second" if k == "total" else k) / SECOND_ORDER[n][k],
                    SECOND_ORDER[n][k] / getattr(r, "total_second" if k == "total" else k))
                for n, r in rows.items() for k in keys)
    ok = not misses and elapsed < 10
    assert report_criterion(1, ok, f"5 water rows x 7 columns within x2 (worst ratio {worst:.2f}), "
                                   f"{elapsed:.2f}s; misses: {misses or 'none'}")


def test_criterion_2_second_order_polyacenes(systems, report_criterion):
    t0 = time.perf_counter()
    rows = {n: cm.second_order_cost(systems[n]) for n in POLYACENES}
    elapsed = time.perf_counter() - t0
    misses = _misses(rows, SECOND_ORDER, ("m2", "total"), 3.0, "total_second")
    pent = rows["pentacene"].total_second
    ok = not misses and elapsed < 10
    assert report_criterion(2, ok, f"polyacene M2 and total within x3 (pentacene total {pent:.2e}), "
                                   f"{elapsed:.2f}s; misses: {misses or 'none'}")


def test_criterion_3_first_order_water(systems, report_criterion):
    rows = {n: cm.first_order_cost(systems[n]) for n in WATER}
    misses = []
    for name, rep in rows.items():
        ref = FIRST_ORDER[name]
        for key in ("r", "eps_filter", "kappa", "n_filter"):
            if not within_factor(getattr(rep, key), ref[key], 2.0):
                misses.append(f"{name}.{key}")
        if not within_factor(rep.m1_table_ii_mode, ref["m1"], 2.0):
            misses.append(f"{name}.m1_table_ii_mode")
        if not (rep.m1_paper_eq is not None and rep.m1_paper_eq > rep.m1_table_ii_mode):
            misses.append(f"{name}.m1_paper_eq")
    dimer = rows["(H2O)2"]
    ok = not misses
    assert report_criterion(3, ok, f"r, eps_filter, kappa, n_filter, M1 (table mode) within x2; "
                                   f"(H2O)2 M1 {dimer.m1_table_ii_mode:.2e} table mode, "
                                   f"{dimer.m1_paper_eq:.2e} with 1/delta1; misses: {misses or 'none'}")


def test_criterion_4_phase_estimation_baseline(systems, report_criterion):
    pe = cm.phase_estimation_cost(systems["hexacene"])["baseline_total"]
    ok = within_factor(pe, PE_BASELINE_HEXACENE, 5.0)
    assert report_criterion(4, ok, f"hexacene baseline {pe:.2e} within x5 of 1e10")


POLY_CAP = 10_000


def _draw(family, rng):
    eps = 10 ** rng.uniform(-6, -2)
    if family == "filter":
        x_th = rng.uniform(0.005, 0.4)
        kappa = rng.uniform(0.01, 0.5)
        return cp.build_filter(eps, kappa, x_th, POLY_CAP)
    w = rng.uniform(0.05, 0.6)
    if family == "rect":
        return cp.build_rect(eps, w, POLY_CAP)
    if family == "inverse":
        return cp.build_inverse(eps, w, POLY_CAP)
    return cp.build_ptb(eps, w, rng.uniform(0.02, 1.0) * w / 2, POLY_CAP)


def test_criterion_5_polynomial_certification(report_criterion):
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    violations, max_degree = [], 0
    for family in ("filter", "rect", "inverse", "ptb"):
        for _ in range(20):
            s = _draw(family, rng)
            max_degree = max(max_degree, s.degree)
            rep = cp.check_properties(s, grid_points=100_000)
            violations += [f"{family}:{c['name']}" for c in rep["checks"] if not c["ok"]]
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 300
    assert report_criterion(5, ok, f"80 draws (4 families x 20) on 1e5-node grids, max degree "
                                   f"{max_degree}, {elapsed:.1f}s; violations: {violations or 'none'}")


def test_criterion_6_simulator_oracle(report_criterion):
    rng = np.random.default_rng(6)
    ratios = []
    for i in range(52):
        inst = sim.random_instance(3 + i % 4, rng)
        out = sim.simulate(inst["h"], inst["v"], {
            "p": float(rng.uniform(0.2, 0.9)), "seed": i, "delta0": inst["delta0"],
            "epsilon_filter": 1e-3, "epsilon_ptb": 10 ** rng.uniform(-5, -2)})
        ratios.append(out["error"] / out["bound"])
    bound_ok = all(r <= 1.0 for r in ratios)

    h, v = pauli.parse_pauli_sum("1.0 Z"), pauli.parse_pauli_sum("0.1 X")
    toy = sim.simulate(h, v, {"p": 0.5, "seed": 0, "delta0": 1e-4, "epsilon_filter": 1e-3,
                              "epsilon_ptb": 1e-3})
    toy_ok = abs(toy["e2_qsp"] + 0.005) <= max(toy["bound"], 1e-6)

    slopes = []
    for i in range(20):
        hh, vv = sim.sweep_instance(3 + i % 4, rng)
        slopes.append(sim.lambda_sweep(sim.to_dense(hh), sim.to_dense(vv))["slope"])
    slope = float(np.median(slopes))
    in_range = sum(2.7 <= s <= 3.3 for s in slopes)
    slope_ok = 2.7 <= slope <= 3.3

    ok = bound_ok and toy_ok and slope_ok
    assert report_criterion(6, ok, f"bound held on {sum(r <= 1 for r in ratios)}/{len(ratios)} "
                                   f"instances (max error/bound {max(ratios):.2f}); toy e2 "
                                   f"{toy['e2_qsp']:.6f}; median lambda slope {slope:.3f} "
                                   f"({in_range}/20 instances individually in [2.7, 3.3])")


def pauli_coefficients(matrix, n):
    """Expansion coefficients tr(P H) / 2^n over all Pauli strings."""
    out = {}
    for letters in itertools.product("IXYZ", repeat=n):
        label = "".join(letters)
        c = np.trace(sim.pauli_matrix(label) @ matrix) / 2 ** n
        if abs(c) > 0:
            out[label] = c
    return out


def test_criterion_7_majorana_pipeline(report_criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(50):
        ints = pauli.random_integrals(1 + i % 2, rng)
        ours = pauli.hamiltonian_from_integrals(ints)
        n = 2 * ints.n_orbitals
        oracle = pauli_coefficients(pauli.fock_oracle(ints).matrix, n)
        for label in set(oracle) | set(ours.terms):
            worst = max(worst, abs(oracle.get(label, 0.0) - ours.terms.get(label, 0.0)))
    ok = worst <= 1e-10
    assert report_criterion(7, ok, f"50 integral sets (n_orbitals 1, 2), max coefficient error "
                                   f"{worst:.1e}")


def test_criterion_8_rae_optimality(report_criterion):
    rng = np.random.default_rng(8)
    beaten = 0
    worst_rel = 0.0
    for _ in range(10):
        weights = rng.uniform(0.05, 5.0, size=int(rng.integers(2, 8)))
        delta = float(rng.uniform(0.01, 0.5))
        closed = cm.rae_allocation(weights, delta)["total"]
        beaten += sum(closed > random_feasible_total(weights, delta, rng) * (1 + 1e-12)
                      for _ in range(100))
        worst_rel = max(worst_rel, abs(numeric_min_total(weights, delta) / closed - 1.0))
    ok = beaten == 0 and worst_rel <= 1e-6
    assert report_criterion(8, ok, f"10 instances x 100 random allocations, closed form beaten "
                                   f"{beaten} times; numeric minimizer rel. gap {worst_rel:.1e}")


@pytest.mark.parametrize("name", WATER)
def test_first_order_totals_documented(systems, name):
    """Both M1 readings are emitted and consistent with each other."""
    rep = cm.first_order_cost(systems[name])
    delta1 = rep.budget["delta1"]
    assert math.isclose(rep.m1_paper_eq, rep.m1_table_ii_mode / delta1, rel_tol=1e-12)
