"""Command-line front end.

Exit status: 0 on success, 1 on a domain or contract error, 2 on I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import chebpoly, costmodel, pauli, sim
from .errors import ContractError, ParseError, QspertError

COST_COMMANDS = ("cost-first", "cost-second", "cost-pe", "cost-table")
POLY_KINDS = ("filter", "sign", "rect", "inverse", "ptb", "gaussian", "erf")
POLY_PARAMS = {
    "filter": ("epsilon", "kappa", "x_th"),
    "sign": ("epsilon", "kappa", "c"),
    "rect": ("epsilon", "w"),
    "inverse": ("epsilon", "w"),
    "ptb": ("epsilon", "w", "w0"),
    "gaussian": ("beta", "epsilon"),
    "erf": ("k", "epsilon", "c"),
}
RUN_KEYS = ("p", "seed", "delta0", "epsilon_filter", "epsilon_ptb", "reference")


def data_path(name: str) -> Path:
    return Path(str(resources.files("qspert") / "data" / name))


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def parse_overrides(items, allowed) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ContractError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        if key not in allowed:
            raise ContractError(f"unknown override key {key!r}; allowed: {', '.join(allowed)}")
        out[key] = _parse_value(raw)
    return out


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------------
# cost commands
# --------------------------------------------------------------------------


def _load_systems(args) -> list[dict]:
    path = args.input[0] if args.input else data_path("table1.json")
    obj = json.loads(_read(path))
    rows = obj if isinstance(obj, list) else [obj]
    fields = [f for f in costmodel.SystemParams.__dataclass_fields__]
    ov = parse_overrides(args.set, fields)
    if args.delta_chem is not None:
        ov["delta_chem"] = args.delta_chem
    return [dict(r, **ov) for r in rows]


def _text_table(records: list[dict], cols) -> str:
    lines = ["  ".join(f"{c:>12}" for c in cols)]
    for rec in records:
        cells = []
        for c in cols:
            v = rec.get(c)
            cells.append(f"{v:>12}" if isinstance(v, str) else
                         f"{'':>12}" if v is None else f"{v:>12.3g}")
        lines.append("  ".join(cells))
    return "\n".join(lines) + "\n"


def cmd_cost(args) -> int:
    rows = _load_systems(args)
    if args.command == "cost-table":
        res = costmodel.report_tables(rows, args.order)
        fmt = args.format or "csv"
        if fmt == "csv":
            _emit(args, res["csv"])
        elif fmt == "json":
            _emit(args, _dumps(res["json"]))
        else:
            cols = ["system"] + list(costmodel.CSV_COLUMNS[1:])
            recs = [dict(zip(cols, line.split(","))) for line in res["csv"].splitlines()[1:]]
            _emit(args, _text_table(recs, cols))
        return 0
    out = []
    for d in rows:
        sp = costmodel.SystemParams.from_dict(d)
        if args.command == "cost-pe":
            out.append({"system": sp.name} | costmodel.phase_estimation_cost(sp))
        else:
            order = "first" if args.command == "cost-first" else "second"
            out.append(costmodel.full_cost(sp, order).to_dict())
    fmt = args.format or "json"
    if fmt == "json":
        _emit(args, _dumps(out if len(out) != 1 else out[0]))
    else:
        cols = [k for k, v in out[0].items() if not isinstance(v, dict)] if out else []
        if fmt == "csv":
            lines = [",".join(cols)]
            lines += [",".join("" if r.get(c) is None else str(r[c]) for c in cols) for r in out]
            _emit(args, "\n".join(lines) + "\n")
        else:
            _emit(args, _text_table(out, cols))
    return 0


# --------------------------------------------------------------------------
# polynomial commands
# --------------------------------------------------------------------------


def cmd_poly_build(args) -> int:
    names = POLY_PARAMS[args.kind]
    p = parse_overrides(args.set, names)
    missing = [k for k in names if k not in p and k != "c"]
    if missing:
        raise ContractError(f"{args.kind} needs --set {', '.join(missing)}")
    cap = args.degree_cap
    k = args.kind
    if k == "filter":
        s = chebpoly.build_filter(p["epsilon"], p["kappa"], p["x_th"], cap)
    elif k == "sign":
        s = chebpoly.build_sign(p["epsilon"], p["kappa"], p.get("c", 0.0), cap)
    elif k == "rect":
        s = chebpoly.build_rect(p["epsilon"], p["w"], cap)
    elif k == "inverse":
        s = chebpoly.build_inverse(p["epsilon"], p["w"], cap)
    elif k == "ptb":
        s = chebpoly.build_ptb(p["epsilon"], p["w"], p["w0"], cap)
    elif k == "gaussian":
        s = chebpoly.build_gaussian(p["beta"], p["epsilon"], cap)
    else:
        s = chebpoly.build_erf(p["k"], p["epsilon"], p.get("c", 0.0), cap)
    if args.format == "json":
        _emit(args, _dumps({"parity": s.parity, "degree": s.degree,
                            "coeffs": s.coeffs, "meta": dict(s.meta)}))
    else:
        _emit(args, chebpoly.dumps_series(s))
    return 0


def cmd_poly_check(args) -> int:
    if not args.input:
        raise ContractError("poly-check needs --input SERIES")
    s = chebpoly.loads_series(_read(args.input[0]))
    rep = chebpoly.certify_admissible(s, args.grid_points)
    _emit(args, _dumps(rep.to_dict() | {"degree": s.degree, "parity": s.parity}))
    return 0


# --------------------------------------------------------------------------
# simulation and Hamiltonians
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    paths = args.input or []
    if len(paths) not in (2, 3):
        raise ContractError("simulate needs --input H.pauli V.pauli [RUN.json]")
    h = pauli.parse_pauli_sum(_read(paths[0]))
    v = pauli.parse_pauli_sum(_read(paths[1]))
    if h.n_qubits != v.n_qubits:
        raise ContractError("H and V act on different qubit counts")
    cfg = json.loads(_read(paths[2])) if len(paths) == 3 else {}
    unknown = set(cfg) - set(RUN_KEYS)
    if unknown:
        raise ContractError(f"unknown run-config keys: {sorted(unknown)}")
    cfg.update(parse_overrides(args.set, RUN_KEYS))
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = sim.simulate(h, v, cfg, args.degree_cap)
    _emit(args, _dumps(out))
    return 0


def cmd_majorana(args) -> int:
    if not args.input:
        raise ContractError("hamiltonian-majorana needs --input INTEGRALS.json")
    ints = pauli.FermionIntegrals.from_json(_read(args.input[0])).validate()
    m = pauli.majorana_from_integrals(ints)
    ham = pauli.jordan_wigner(m)
    if args.format == "json":
        _emit(args, _dumps({
            "n_qubits": ham.n_qubits,
            "pauli": dict(ham.terms),
            "majorana": [{"factors": [list(f) for f in mono],
                          "coeff": [c.real, c.imag]} for mono, c in m.terms.items()],
        }))
    else:
        _emit(args, pauli.dumps_pauli_sum(ham))
    return 0


def cmd_partition(args) -> int:
    if not args.input:
        raise ContractError("hamiltonian-partition needs --input TOTAL.pauli")
    if args.active is None:
        raise ContractError("hamiltonian-partition needs --active q0,q1,...")
    if not args.output:
        raise ContractError("hamiltonian-partition needs --output PREFIX")
    total = pauli.parse_pauli_sum(_read(args.input[0]))
    active = [int(t) for t in args.active.split(",") if t.strip()]
    h, v = pauli.partition_active(total, active)
    write_atomic(f"{args.output}_h.pauli", pauli.dumps_pauli_sum(h))
    write_atomic(f"{args.output}_v.pauli", pauli.dumps_pauli_sum(v))
    return 0


def _validate_one(path: str) -> str:
    try:
        text = _read(path)
    except OSError as exc:
        return f"io error: {exc.strerror or exc}"
    try:
        if path.endswith(".pauli"):
            a = pauli.parse_pauli_sum(text)
            return f"ok ({len(a.terms)} terms, {a.n_qubits} qubits)"
        if text.lstrip().startswith("chebyshev"):
            s = chebpoly.loads_series(text)
            return f"ok (degree {s.degree}, parity {s.parity})"
        obj = json.loads(text)
        if isinstance(obj, dict) and "n_orbitals" in obj:
            bad = pauli.FermionIntegrals.from_json(text).symmetry_violations()
            if bad:
                return "; ".join(f"violation {n}: max deviation {d:.3e}" for n, d in bad)
            return "ok (integrals)"
        if isinstance(obj, dict) and set(obj) <= set(RUN_KEYS):
            return "ok (run config)"
        rows = obj if isinstance(obj, list) else [obj]
        for r in rows:
            costmodel.SystemParams.from_dict(r)
        return f"ok ({len(rows)} systems)"
    except (QspertError, ValueError, TypeError) as exc:
        return f"error: {exc}"


def cmd_validate(args) -> int:
    lines = [f"{p}: {_validate_one(p)}" for p in args.input or []]
    _emit(args, "".join(line + "\n" for line in lines))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qspert", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", nargs="+", help="input file(s)")
    common.add_argument("--output", help="output path (stdout if omitted)")
    common.add_argument("--format", choices=("csv", "json", "text"))
    common.add_argument("--seed", type=int)
    common.add_argument("--delta-chem", type=float, dest="delta_chem")
    common.add_argument("--degree-cap", type=int, default=chebpoly.DEFAULT_DEGREE_CAP,
                        dest="degree_cap")
    common.add_argument("--grid-points", type=int, default=100_000, dest="grid_points")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="parameter override (repeatable)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COST_COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "cost-table":
            p.add_argument("--order", choices=("first", "second"), default="second")
    p = sub.add_parser("poly-build", parents=[common])
    p.add_argument("--kind", choices=POLY_KINDS, required=True)
    sub.add_parser("poly-check", parents=[common])
    sub.add_parser("simulate", parents=[common])
    sub.add_parser("hamiltonian-majorana", parents=[common])
    p = sub.add_parser("hamiltonian-partition", parents=[common])
    p.add_argument("--active", help="comma-separated active qubit indices")
    sub.add_parser("validate", parents=[common])
    return ap


HANDLERS = {
    "poly-build": cmd_poly_build,
    "poly-check": cmd_poly_check,
    "simulate": cmd_simulate,
    "hamiltonian-majorana": cmd_majorana,
    "hamiltonian-partition": cmd_partition,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = cmd_cost if args.command in COST_COMMANDS else HANDLERS[args.command]
    try:
        return handler(args)
    except (QspertError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
