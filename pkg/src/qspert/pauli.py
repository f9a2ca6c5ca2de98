"""Pauli-sum Hamiltonians, norms, active-space partitioning, and the
Majorana / Jordan-Wigner route from molecular integrals to qubits.

Conventions
-----------
* A Pauli string is a ``str`` over ``IXYZ``; letter ``j`` acts on qubit ``j``.
  Dense matrices (see :mod:`qspert.sim`) use ``kron(q0, q1, ...)`` order.
* Spin-orbital ``(p, sigma)`` sits on qubit ``2p + sigma`` with alpha = 0,
  beta = 1.
* A Majorana factor is a triple ``(p, sigma, flavor)``; flavor 0 is
  ``a + a^dag`` and flavor 1 is ``-i (a - a^dag)``. Under Jordan-Wigner these
  map to ``Z...Z X_j`` and ``Z...Z Y_j``, so ``|1>`` is the occupied state.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import ConsistencyError, ContractError, ParseError

PRUNE_TOL = 1e-12
_LETTERS = frozenset("IXYZ")


# --------------------------------------------------------------------------
# Pauli sums
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PauliSum:
    """Real-weighted sum of Pauli strings on ``n_qubits`` qubits.

    Use :meth:`from_terms` to build one; it merges duplicates and drops
    zeros. ``terms`` is a read-only mapping.
    """

    terms: Mapping[str, float]
    n_qubits: int

    @classmethod
    def from_terms(cls, items: Iterable[tuple[str, float]] | Mapping[str, float],
                   n_qubits: int | None = None, prune: float = 0.0) -> "PauliSum":
        if isinstance(items, Mapping):
            items = items.items()
        acc: dict[str, float] = defaultdict(float)
        for s, c in items:
            if n_qubits is None:
                n_qubits = len(s)
            if len(s) != n_qubits:
                raise ContractError(f"Pauli string {s!r} has length {len(s)}, expected {n_qubits}")
            if not set(s) <= _LETTERS:
                raise ContractError(f"bad letter in Pauli string {s!r}")
            acc[s] += float(c)
        terms = {s: c for s, c in sorted(acc.items()) if abs(c) > prune}
        return cls(MappingProxyType(terms), n_qubits or 0)

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliSum":
        return cls(MappingProxyType({}), n_qubits)

    @property
    def identity_label(self) -> str:
        return "I" * self.n_qubits

    @property
    def identity_coeff(self) -> float:
        return self.terms.get(self.identity_label, 0.0)

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms.items())

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and dict(self.terms) == dict(other.terms)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if self.n_qubits != other.n_qubits and len(self) and len(other):
            raise ContractError("qubit counts differ")
        n = max(self.n_qubits, other.n_qubits)
        return PauliSum.from_terms(list(self.terms.items()) + list(other.terms.items()), n)

    def scaled(self, factor: float) -> "PauliSum":
        return PauliSum.from_terms({s: c * factor for s, c in self.terms.items()}, self.n_qubits)

    def coefficients(self, include_identity: bool = False) -> np.ndarray:
        ident = self.identity_label
        return np.array([c for s, c in self.terms.items() if include_identity or s != ident])

    def labels(self, include_identity: bool = False) -> list[str]:
        ident = self.identity_label
        return [s for s in self.terms if include_identity or s != ident]


def parse_pauli_sum(text: str) -> PauliSum:
    """Parse ``<coeff> <IXYZ-string>`` lines; ``#`` starts a comment."""
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected '<coeff> <pauli>', got {raw!r}")
        try:
            coeff = float(parts[0])
        except ValueError:
            raise ParseError(f"line {lineno}: bad coefficient {parts[0]!r}") from None
        if not math.isfinite(coeff):
            raise ParseError(f"line {lineno}: non-finite coefficient")
        label = parts[1].upper()
        if not set(label) <= _LETTERS:
            raise ParseError(f"line {lineno}: bad Pauli letter in {parts[1]!r}")
        items.append((label, coeff))
    n = len(items[0][0]) if items else 0
    for label, _ in items:
        if len(label) != n:
            raise ParseError(f"Pauli string {label!r} has length {len(label)}, expected {n}")
    return PauliSum.from_terms(items, n)


def dumps_pauli_sum(a: PauliSum) -> str:
    return "".join(f"{c!r} {s}\n" for s, c in a.terms.items())


def norms(a: PauliSum, include_identity: bool = False) -> dict:
    """One-norm, the (sum |a|^{2/3})^{3/2} measure, and the term count."""
    c = np.abs(a.coefficients(include_identity))
    return {
        "one_norm": float(c.sum()),
        "two_thirds_measure": float(np.sum(c ** (2.0 / 3.0)) ** 1.5),
        "term_count": int(c.size),
    }


def shift_identity(h: PauliSum, eps_hat0: float) -> PauliSum:
    """``H' = H - eps_hat0 * I``; the input must not carry an identity term."""
    if h.identity_label in h.terms:
        raise ContractError("input already has an identity term")
    if eps_hat0 == 0.0:
        return h
    return PauliSum.from_terms(list(h.terms.items()) + [(h.identity_label, -eps_hat0)],
                               h.n_qubits)


def partition_active(total: PauliSum, active_qubits: Iterable[int]) -> tuple[PauliSum, PauliSum]:
    """Split into (H, V): V takes every term with X or Y on an inactive qubit."""
    active = set(active_qubits)
    for q in active:
        if not 0 <= q < total.n_qubits:
            raise ContractError(f"active qubit {q} out of range")
    h, v = [], []
    for s, c in total.terms.items():
        flips_inactive = any(ch in "XY" and j not in active for j, ch in enumerate(s))
        (v if flips_inactive else h).append((s, c))
    return (PauliSum.from_terms(h, total.n_qubits), PauliSum.from_terms(v, total.n_qubits))


# --------------------------------------------------------------------------
# integrals
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FermionIntegrals:
    """Spatial-orbital integrals in Hartree.

    Chemist ordering: the two-body part reads
    ``1/2 sum g[p,q,r,s] a+_{p sigma} a+_{r tau} a_{s tau} a_{q sigma}``.
    """

    n_orbitals: int
    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        n = self.n_orbitals
        h = np.asarray(self.h, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if h.shape != (n, n) or g.shape != (n, n, n, n):
            raise ContractError(f"integral shapes {h.shape}, {g.shape} do not match n_orbitals={n}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    def symmetry_violations(self, tol: float = 1e-10) -> list[tuple[str, float]]:
        h, g = self.h, self.g
        checks = [
            ("h_pq = h_qp", np.max(np.abs(h - h.T), initial=0.0)),
            ("g_pqrs = g_qprs", np.max(np.abs(g - g.transpose(1, 0, 2, 3)), initial=0.0)),
            ("g_pqrs = g_pqsr", np.max(np.abs(g - g.transpose(0, 1, 3, 2)), initial=0.0)),
            ("g_pqrs = g_rspq", np.max(np.abs(g - g.transpose(2, 3, 0, 1)), initial=0.0)),
        ]
        return [(name, float(dev)) for name, dev in checks if dev > tol]

    def validate(self, tol: float = 1e-10) -> "FermionIntegrals":
        bad = self.symmetry_violations(tol)
        if bad:
            name, dev = max(bad, key=lambda t: t[1])
            raise ContractError(f"integral symmetry {name} violated (max deviation {dev:.3e})")
        return self

    @classmethod
    def from_json(cls, text: str) -> "FermionIntegrals":
        try:
            obj = json.loads(text)
            return cls(int(obj["n_orbitals"]), np.array(obj["h"], dtype=float),
                       np.array(obj["g"], dtype=float))
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad integrals JSON: {exc}") from None

    def to_json(self) -> str:
        return json.dumps({"n_orbitals": self.n_orbitals, "h": self.h.tolist(),
                           "g": self.g.tolist()})


def random_integrals(n_orbitals: int, rng: np.random.Generator, scale: float = 1.0) -> FermionIntegrals:
    """Random real integrals with the 8-fold symmetry (test/demo helper)."""
    n = n_orbitals
    h = rng.normal(size=(n, n)) * scale
    h = 0.5 * (h + h.T)
    g = rng.normal(size=(n, n, n, n)) * scale
    g = g + g.transpose(1, 0, 2, 3)
    g = g + g.transpose(0, 1, 3, 2)
    g = g + g.transpose(2, 3, 0, 1)
    return FermionIntegrals(n, h, g / 8.0)


# --------------------------------------------------------------------------
# Majorana operators
# --------------------------------------------------------------------------

ALPHA, BETA = 0, 1


def _mkey(f: tuple[int, int, int]) -> int:
    p, sigma, flavor = f
    return 2 * (2 * p + sigma) + flavor


def canonical_monomial(factors: Iterable[tuple[int, int, int]]) -> tuple[tuple, int]:
    """Sort Majorana factors by ``(qubit, flavor)`` and cancel squares.

    Returns the canonical factor tuple and the sign picked up by the
    anticommuting swaps.
    """
    seq = list(factors)
    sign = 1
    for i in range(1, len(seq)):  # insertion sort, each adjacent swap flips sign
        j = i
        while j > 0 and _mkey(seq[j - 1]) > _mkey(seq[j]):
            seq[j - 1], seq[j] = seq[j], seq[j - 1]
            sign = -sign
            j -= 1
    out: list = []
    for f in seq:
        if out and out[-1] == f:
            out.pop()
        else:
            out.append(f)
    return tuple(out), sign


@dataclass(frozen=True, eq=False)
class MajoranaSum:
    """Complex-weighted sum of canonical Majorana monomials."""

    terms: Mapping[tuple, complex]
    n_orbitals: int

    @classmethod
    def from_products(cls, items: Iterable[tuple[Iterable[tuple[int, int, int]], complex]],
                      n_orbitals: int, prune: float = PRUNE_TOL) -> "MajoranaSum":
        acc: dict[tuple, complex] = defaultdict(complex)
        for factors, coeff in items:
            mono, sign = canonical_monomial(factors)
            acc[mono] += sign * coeff
        terms = {m: c for m, c in sorted(acc.items()) if abs(c) > prune}
        return cls(MappingProxyType(terms), n_orbitals)

    def __len__(self):
        return len(self.terms)


def majorana_from_integrals(ints: FermionIntegrals) -> MajoranaSum:
    """Molecular Hamiltonian as a Majorana polynomial.

    Term groups: identity; quadratic ``gamma_{p s 0} gamma_{q s 1}``; same-spin
    quartic over ``p > r, s > q``; opposite-spin quartic split into
    ``p > r, q <= s`` and ``p >= r, q > s``; and the ``g_pqpq`` diagonal family.
    The same-spin group uses one spin label for all four factors; this is
    the reading that reproduces the Fock-space Hamiltonian.
    """
    ints.validate()
    n, h, g = ints.n_orbitals, ints.h, ints.g
    items: list = []
    spins = (ALPHA, BETA)

    const = (np.trace(h) + 0.5 * np.einsum("pprr->", g) - 0.25 * np.einsum("prrp->", g))
    items.append(((), complex(const)))

    one = h + np.einsum("pqrr->pq", g) - 0.5 * np.einsum("prrq->pq", g)
    for p in range(n):
        for q in range(n):
            if one[p, q] != 0.0:
                for s in spins:
                    items.append((((p, s, 0), (q, s, 1)), 0.5j * one[p, q]))

    for p in range(n):
        for r in range(n):
            for q in range(n):
                for s_ in range(n):
                    gpqrs = g[p, q, r, s_]
                    if p > r and s_ > q:
                        same = g[p, q, r, s_] - g[p, s_, r, q]
                        if same != 0.0:
                            for s in spins:
                                items.append((((p, s, 0), (r, s, 0), (q, s, 1), (s_, s, 1)),
                                              0.25 * same))
                    if gpqrs == 0.0:
                        continue
                    if (p > r and q <= s_) or (p >= r and q > s_):
                        for s in spins:
                            t = 1 - s
                            items.append((((p, s, 0), (r, t, 0), (q, s, 1), (s_, t, 1)),
                                          0.25 * gpqrs))
    for p in range(n):
        for q in range(n):
            if g[p, q, p, q] != 0.0:
                items.append((((p, ALPHA, 0), (p, BETA, 0), (q, ALPHA, 1), (q, BETA, 1)),
                              0.25 * g[p, q, p, q]))
    return MajoranaSum.from_products(items, n)


# --------------------------------------------------------------------------
# Jordan-Wigner
# --------------------------------------------------------------------------

# A Pauli operator is held as (phase, x, z) meaning i^phase * X^x Z^z, with
# bit j of x/z referring to qubit j and X^x Z^z ordered qubit by qubit.


def _jw_factor(f: tuple[int, int, int]) -> tuple[int, int, int]:
    p, sigma, flavor = f
    j = 2 * p + sigma
    below = (1 << j) - 1
    if flavor == 0:
        return 0, 1 << j, below
    return 1, 1 << j, below | (1 << j)  # Y = i X Z


def _mul(a: tuple[int, int, int], b: tuple[int, int, int]) -> tuple[int, int, int]:
    pa, xa, za = a
    pb, xb, zb = b
    # Z^za X^xb = (-1)^{|za & xb|} X^xb Z^za
    swap = 2 * (bin(za & xb).count("1") % 2)
    return (pa + pb + swap) % 4, xa ^ xb, za ^ zb


def _to_label(op: tuple[int, int, int], n_qubits: int) -> tuple[str, complex]:
    phase, x, z = op
    letters = []
    ny = 0
    for j in range(n_qubits):
        xj, zj = (x >> j) & 1, (z >> j) & 1
        if xj and zj:
            letters.append("Y")
            ny += 1
        else:
            letters.append("X" if xj else ("Z" if zj else "I"))
    # X Z = -i Y on every qubit carrying both bits
    return "".join(letters), 1j ** ((phase - ny) % 4)


def jordan_wigner(m: MajoranaSum, n_qubits: int | None = None,
                  tol: float = PRUNE_TOL) -> PauliSum:
    """Map a Hermitian Majorana polynomial to a real Pauli sum."""
    n_qubits = 2 * m.n_orbitals if n_qubits is None else n_qubits
    acc: dict[str, complex] = defaultdict(complex)
    for mono, coeff in m.terms.items():
        op = (0, 0, 0)
        for f in mono:
            op = _mul(op, _jw_factor(f))
        label, phase = _to_label(op, n_qubits)
        acc[label] += coeff * phase
    scale = max([1.0] + [abs(c) for c in acc.values()])
    worst = max([0.0] + [abs(c.imag) for c in acc.values()])
    if worst > tol * scale:
        raise ConsistencyError(f"imaginary residue {worst:.3e} after Jordan-Wigner mapping")
    return PauliSum.from_terms({s: c.real for s, c in acc.items()}, n_qubits, prune=tol)


def hamiltonian_from_integrals(ints: FermionIntegrals) -> PauliSum:
    return jordan_wigner(majorana_from_integrals(ints))


# --------------------------------------------------------------------------
# brute-force oracle
# --------------------------------------------------------------------------

FOCK_QUBIT_CAP = 8


def annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense ``a_j`` with a Z string on lower modes; ``|1>`` means occupied."""
    z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    eye = np.eye(2)
    ops = []
    for j in range(n_modes):
        mats = [z] * j + [lower] + [eye] * (n_modes - j - 1)
        out = np.array([[1.0]])
        for mtx in mats:
            out = np.kron(out, mtx)
        ops.append(out)
    return ops


def fock_oracle(ints: FermionIntegrals):
    """Dense second-quantized Hamiltonian built straight from creation and
    annihilation matrices, independent of the Majorana route."""
    from .sim import DenseOperator

    n = ints.n_orbitals
    n_modes = 2 * n
    if n_modes > FOCK_QUBIT_CAP:
        raise ContractError(f"fock_oracle limited to {FOCK_QUBIT_CAP} qubits")
    a = annihilators(n_modes)
    ad = [op.T.copy() for op in a]
    dim = 2 ** n_modes
    hmat = np.zeros((dim, dim))
    mode = lambda p, s: 2 * p + s  # noqa: E731
    for p in range(n):
        for q in range(n):
            if ints.h[p, q] != 0.0:
                for s in (ALPHA, BETA):
                    hmat += ints.h[p, q] * ad[mode(p, s)] @ a[mode(q, s)]
    for p in range(n):
        for q in range(n):
            for r in range(n):
                for s_ in range(n):
                    gv = ints.g[p, q, r, s_]
                    if gv == 0.0:
                        continue
                    for sg in (ALPHA, BETA):
                        for tu in (ALPHA, BETA):
                            hmat += 0.5 * gv * (ad[mode(p, sg)] @ ad[mode(r, tu)]
                                                @ a[mode(s_, tu)] @ a[mode(q, sg)])
    return DenseOperator(hmat.astype(complex), n_modes)
