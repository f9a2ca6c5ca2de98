"""Resource estimates in units of one block-encoding call of H.

Inputs are the coarse system descriptors (norms, gap, overlap, term-count
ratio); outputs are error-budget parameters, polynomial degrees, shot counts
and totals for the first- and second-order energies plus a phase-estimation
baseline.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import chebpoly
from .errors import ContractError, DomainError, InfeasibleBudgetError, QspertError

ALPHA_RAE = 5.0 * math.sqrt(2.0) / 2.0 * math.e ** 2 / (math.e - 1.0)
DELTA_CHEM = 1e-3
REGIMES = ("gap_dominant", "correlation_dominant")

CSV_COLUMNS = ("system", "r", "eps_filter", "eps_ptb", "kappa", "x_th", "w", "w0",
               "n_filter", "n_ptb", "m1", "m2", "aa_reps", "total_first",
               "total_second", "total_pe_baseline")


@dataclass(frozen=True)
class SystemParams:
    h1_norm: float
    v1_norm: float
    v23_measure: float
    gap_delta: float
    overlap_p: float
    lv_over_lh: float
    molecules_m: int = 1
    delta_chem: float = DELTA_CHEM
    regime: str = "gap_dominant"
    eps_corr: float | None = None
    name: str = ""
    l_h: int | None = None
    t_per_call: float | None = None

    def __post_init__(self):
        for key in ("h1_norm", "v1_norm", "v23_measure", "gap_delta", "delta_chem", "lv_over_lh"):
            if not getattr(self, key) > 0:
                raise DomainError(f"{key} must be positive")
        if not 0.0 < self.overlap_p <= 1.0:
            raise DomainError("overlap_p must lie in (0, 1]")
        if int(self.molecules_m) != self.molecules_m or self.molecules_m < 1:
            raise DomainError("molecules_m must be a positive integer")
        if self.regime not in REGIMES:
            raise DomainError(f"regime must be one of {REGIMES}")
        if self.regime == "correlation_dominant" and not (self.eps_corr and self.eps_corr > 0):
            raise ContractError("correlation_dominant regime needs a positive eps_corr")

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown SystemParams keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Budget:
    delta0: float
    delta1: float
    delta2: float


@dataclass
class CostReport:
    """Every total is the product of the stored factors (see :func:`rederive`)."""

    system: str = ""
    order: str = ""
    r: float | None = None
    eps_filter: float | None = None
    eps_ptb: float | None = None
    kappa: float | None = None
    x_th: float | None = None
    w: float | None = None
    w0: float | None = None
    n_filter: float | None = None
    n_ptb: float | None = None
    m1_paper_eq: float | None = None
    m1_table_ii_mode: float | None = None
    m2: float | None = None
    aa_repetitions: float | None = None
    total_first: float | None = None
    total_first_table_ii_mode: float | None = None
    total_second: float | None = None
    total_pe_baseline: float | None = None
    total_eps0_estimation: float | None = None
    ancilla_l: int | None = None
    budget: dict | None = None
    t_gates: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def split_budget(sp: SystemParams) -> Budget:
    third = sp.delta_chem / 3.0
    if sp.regime == "gap_dominant":
        return Budget(third, third, third)
    return Budget(sp.gap_delta / sp.eps_corr * third, third, third)


def rae_allocation(weights, delta: float) -> dict:
    """Optimal per-term shot counts for a weighted sum of expectation values.

    ``M_l = alpha |v_l|^(2/3) sqrt(sum |v|^(2/3)) / delta``.
    """
    v = np.abs(np.asarray(weights, dtype=float))
    if v.size == 0 or np.any(v == 0.0):
        raise DomainError("weights must be nonzero")
    if not delta > 0:
        raise DomainError("delta must be positive")
    v23 = v ** (2.0 / 3.0)
    per_term = ALPHA_RAE * v23 * math.sqrt(v23.sum()) / delta
    return {"per_term": per_term, "total": float(per_term.sum())}


def achieved_variance(weights, counts) -> float:
    """``sum v_l^2 (alpha / M_l)^2`` for given shot counts."""
    v = np.asarray(weights, dtype=float)
    m = np.asarray(counts, dtype=float)
    return float(np.sum(v * v * (ALPHA_RAE / m) ** 2))


def _ancilla(sp: SystemParams) -> int | None:
    return None if sp.l_h is None else math.ceil(math.log2(sp.l_h + 1))


def _filter_window(sp: SystemParams, b: Budget) -> tuple[float, float]:
    if b.delta0 >= sp.gap_delta:
        raise InfeasibleBudgetError(f"delta0={b.delta0} leaves no window below gap {sp.gap_delta}")
    return (sp.gap_delta - b.delta0) / sp.h1_norm, b.delta0 / sp.h1_norm


def _filter_part(sp: SystemParams, r_total: float, kappa: float, x_th: float) -> dict:
    """Per-molecule r and eps, filter degree and amplification repetitions."""
    m = sp.molecules_m
    p = sp.overlap_p
    r_i = r_total / m
    if p == 1.0:
        return {"r": r_i, "eps_filter": 0.0, "n_filter": 0.0, "aa": 0.0}
    eps_i = r_i * math.sqrt(p / (1.0 - p))
    n_filter = chebpoly.degree_filter(eps_i, kappa, x_th)["exact"]
    aa = m * math.log(2.0 / r_i) / math.sqrt(p)
    return {"r": r_i, "eps_filter": eps_i, "n_filter": n_filter, "aa": aa}


def _t_gates(sp: SystemParams, totals: dict) -> dict | None:
    if sp.t_per_call is None:
        return None
    return {k: v * sp.t_per_call for k, v in totals.items() if v is not None}


def first_order_cost(sp: SystemParams) -> CostReport:
    b = split_budget(sp)
    kappa, x_th = _filter_window(sp, b)
    fp = _filter_part(sp, b.delta1 / (20.0 * sp.v1_norm), kappa, x_th)
    m1_table = ALPHA_RAE * sp.v23_measure
    m1 = m1_table / b.delta1
    per_prep = 2.0 * fp["aa"] * fp["n_filter"]
    rep = CostReport(
        system=sp.name, order="first", r=fp["r"], eps_filter=fp["eps_filter"],
        kappa=kappa, x_th=x_th, n_filter=fp["n_filter"],
        m1_paper_eq=m1, m1_table_ii_mode=m1_table, aa_repetitions=fp["aa"],
        total_first=m1 * per_prep, total_first_table_ii_mode=m1_table * per_prep,
        ancilla_l=_ancilla(sp), budget=asdict(b))
    rep.t_gates = _t_gates(sp, {"total_first": rep.total_first})
    return rep


def second_order_cost(sp: SystemParams) -> CostReport:
    b = split_budget(sp)
    kappa, x_th = _filter_window(sp, b)
    w, w0 = kappa, x_th
    fp = _filter_part(sp, b.delta2 * sp.gap_delta / (20.0 * sp.v1_norm ** 2), kappa, x_th)
    eps_ptb = sp.h1_norm / sp.v1_norm ** 2 * b.delta2 / 10.0
    if not eps_ptb < 1.0:
        raise DomainError(f"eps_ptb={eps_ptb:.3g} is not below 1; the budget is too loose")
    n_ptb = chebpoly.degree_ptb(eps_ptb, w, w0)["n_ptb"]
    m2 = 2.0 * ALPHA_RAE / (w * sp.h1_norm) / b.delta2 * sp.v23_measure ** 2
    total = m2 * (2.0 * fp["aa"] * fp["n_filter"] + n_ptb)
    rep = CostReport(
        system=sp.name, order="second", r=fp["r"], eps_filter=fp["eps_filter"],
        eps_ptb=eps_ptb, kappa=kappa, x_th=x_th, w=w, w0=w0,
        n_filter=fp["n_filter"], n_ptb=n_ptb, m2=m2, aa_repetitions=fp["aa"],
        total_second=total, ancilla_l=_ancilla(sp), budget=asdict(b))
    rep.t_gates = _t_gates(sp, {"total_second": total})
    return rep


def phase_estimation_cost(sp: SystemParams) -> dict:
    """Naive phase estimation of H + V, and the eps0 estimate for H alone.

    The operator norm of h is not among the inputs, so ``h1_norm`` stands in
    for it (an upper bound).
    """
    b = split_budget(sp)
    c = math.sqrt(2.0) * math.pi / 2.0 / sp.overlap_p
    baseline = c * (sp.h1_norm + sp.v1_norm) / sp.delta_chem * (1.0 + sp.lv_over_lh)
    eps0 = c * sp.h1_norm / b.delta0
    return {"baseline_total": baseline, "eps0_estimation": eps0}


def full_cost(sp: SystemParams, order: str = "second") -> CostReport:
    """First- or second-order report with the baseline columns filled in."""
    if order not in ("first", "second"):
        raise DomainError("order must be 'first' or 'second'")
    rep = first_order_cost(sp) if order == "first" else second_order_cost(sp)
    pe = phase_estimation_cost(sp)
    rep.total_pe_baseline = pe["baseline_total"]
    rep.total_eps0_estimation = pe["eps0_estimation"]
    return rep


def rederive(rep: CostReport) -> dict:
    """Recompute totals from the stored factors."""
    out = {}
    if rep.total_first is not None:
        out["total_first"] = 2.0 * rep.m1_paper_eq * rep.aa_repetitions * rep.n_filter
        out["total_first_table_ii_mode"] = (2.0 * rep.m1_table_ii_mode * rep.aa_repetitions
                                            * rep.n_filter)
    if rep.total_second is not None:
        out["total_second"] = rep.m2 * (2.0 * rep.aa_repetitions * rep.n_filter + rep.n_ptb)
    return out


def _row_values(rep: CostReport, order: str) -> dict:
    first = order == "first"
    # Table II quotes M1 without the 1/delta1 factor; emit that column there
    vals = {
        "r": rep.r, "eps_filter": rep.eps_filter, "eps_ptb": rep.eps_ptb,
        "kappa": rep.kappa, "x_th": rep.x_th, "w": rep.w, "w0": rep.w0,
        "n_filter": rep.n_filter, "n_ptb": rep.n_ptb,
        "m1": rep.m1_table_ii_mode if first else None, "m2": rep.m2,
        "aa_reps": rep.aa_repetitions, "total_first": rep.total_first_table_ii_mode,
        "total_second": rep.total_second, "total_pe_baseline": rep.total_pe_baseline,
    }
    return vals


def _fmt(x) -> str:
    return "" if x is None else f"{x:.2e}"


def report_tables(rows, order: str = "second") -> dict:
    """CSV text and a JSON-ready list with one entry per system.

    A row that fails carries its error message instead of numbers; the other
    rows are unaffected.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    records = []
    for i, sp in enumerate(rows):
        name = getattr(sp, "name", "") or f"row{i}"
        try:
            if isinstance(sp, dict):
                sp = SystemParams.from_dict(sp)
                name = sp.name or name
            rep = full_cost(sp, order)
        except (QspertError, TypeError) as exc:
            writer.writerow([name, f"error: {exc}"] + [""] * (len(CSV_COLUMNS) - 2))
            records.append({"system": name, "error": str(exc)})
            continue
        vals = _row_values(rep, order)
        writer.writerow([name] + [_fmt(vals[c]) for c in CSV_COLUMNS[1:]])
        records.append(rep.to_dict() | {"system": name})
    return {"csv": buf.getvalue(), "json": records}


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
