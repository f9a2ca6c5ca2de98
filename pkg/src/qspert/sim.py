"""Dense, desk-scale verification of the perturbation pipeline.

Polynomials act directly on the system register (no block-encoding
ancillas), and every expectation value is computed exactly. States are plain
complex ``numpy`` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import chebpoly
from .chebpoly import ChebyshevSeries
from .errors import ConsistencyError, ContractError, DegeneracyError, DomainError
from .pauli import PauliSum, norms, shift_identity

DENSE_QUBIT_CAP = 12
DEGENERACY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class DenseOperator:
    matrix: np.ndarray
    n_qubits: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2 ** self.n_qubits,) * 2:
            raise ContractError(f"matrix shape {m.shape} does not match {self.n_qubits} qubits")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) <= tol)

    def norm(self) -> float:
        """Spectral norm."""
        return float(np.linalg.norm(self.matrix, 2))


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ground_state: np.ndarray
    epsilon0: float
    gap_delta: float
    eps_hat0: float
    delta0: float


@dataclass
class PerturbationReport:
    e1: float
    e2_exact: float
    e2_qsp: float
    bound: float
    per_term: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def error(self) -> float:
        return abs(self.e2_exact - self.e2_qsp)

    def to_dict(self) -> dict:
        out = {"e1": self.e1, "e2_exact": self.e2_exact, "e2_qsp": self.e2_qsp,
               "bound": self.bound, "error": self.error,
               "per_term": None if self.per_term is None else self.per_term.tolist()}
        out.update(self.extras)
        return out


def _masks(label: str) -> tuple[int, int, int]:
    """(x mask, z mask, number of Y) with qubit 0 on the most significant bit."""
    n = len(label)
    x = z = ny = 0
    for j, ch in enumerate(label):
        bit = 1 << (n - 1 - j)
        if ch in "XY":
            x |= bit
        if ch in "ZY":
            z |= bit
        ny += ch == "Y"
    return x, z, ny


def pauli_matrix(label: str) -> np.ndarray:
    n = len(label)
    dim = 2 ** n
    x, z, ny = _masks(label)
    cols = np.arange(dim)
    # Y = i X Z: apply Z then X, one factor of i per Y
    phase = (1j ** ny) * np.where(np.bitwise_count(cols & z) % 2, -1.0, 1.0)
    out = np.zeros((dim, dim), dtype=complex)
    out[cols ^ x, cols] = phase
    return out


def to_dense(a: PauliSum, cap: int = DENSE_QUBIT_CAP) -> DenseOperator:
    if a.n_qubits > cap:
        raise ContractError(f"{a.n_qubits} qubits exceeds dense cap {cap}")
    dim = 2 ** a.n_qubits
    out = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for label, c in a.terms.items():
        x, z, ny = _masks(label)
        out[cols ^ x, cols] += c * (1j ** ny) * np.where(np.bitwise_count(cols & z) % 2, -1.0, 1.0)
    return DenseOperator(out, a.n_qubits)


def exact_spectrum(h: DenseOperator, delta0: float = 0.0, seed: int = 0,
                   eps_hat0: float | None = None) -> SpectralData:
    """Full eigendecomposition plus a simulated phase-estimation output.

    ``eps_hat0`` defaults to ``epsilon0 + U(-delta0, delta0)`` drawn from
    ``seed``; pass it explicitly to pin worst-case offsets.
    """
    if not h.is_hermitian(1e-10):
        raise ContractError("operator is not Hermitian")
    if delta0 < 0:
        raise DomainError("delta0 must be nonnegative")
    evals, evecs = np.linalg.eigh(h.matrix)
    if evals.size < 2:
        raise DegeneracyError("need at least two levels")
    gap = float(evals[1] - evals[0])
    if gap < DEGENERACY_TOL:
        raise DegeneracyError(f"ground state degenerate (gap {gap:.3e})")
    e0 = float(evals[0])
    if eps_hat0 is None:
        eps_hat0 = e0 + float(np.random.default_rng(seed).uniform(-delta0, delta0))
    elif abs(eps_hat0 - e0) > delta0 * (1 + 1e-12):
        raise ContractError("|eps_hat0 - epsilon0| exceeds delta0")
    return SpectralData(evals, evecs, evecs[:, 0].copy(), e0, gap, float(eps_hat0), float(delta0))


def exact_perturbation(h: DenseOperator, v: DenseOperator, spec: SpectralData) -> dict:
    """First- and second-order Rayleigh-Schroedinger energies."""
    del h  # eigendata already in spec
    g = spec.ground_state
    vm = v.matrix
    e1 = float(np.real(np.vdot(g, vm @ g)))
    vi0 = spec.eigenvectors.conj().T @ (vm @ g)
    denom = spec.eigenvalues[1:] - spec.epsilon0
    e2 = float(-np.sum(np.abs(vi0[1:]) ** 2 / denom))
    return {"e1": e1, "e2": e2}


def second_order_projector_form(h: DenseOperator, v: DenseOperator, spec: SpectralData) -> float:
    """``-<g| V Pi (H - e0)^+ Pi V |g>`` via a dense pseudo-inverse."""
    g = spec.ground_state
    dim = g.size
    proj = np.eye(dim) - np.outer(g, g.conj())
    resolvent = np.linalg.pinv(proj @ (h.matrix - spec.epsilon0 * np.eye(dim)) @ proj,
                               rcond=1e-12, hermitian=True)
    vg = v.matrix @ g
    return float(-np.real(np.vdot(vg, proj @ resolvent @ proj @ vg)))


def _orthogonal_unit(ref: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.normal(size=ref.size) + 1j * rng.normal(size=ref.size)
    r = ref / np.linalg.norm(ref)
    u = u - r * np.vdot(r, u)
    return u / np.linalg.norm(u)


def make_initial_state(ground: np.ndarray, p: float, seed: int = 0) -> np.ndarray:
    """``sqrt(p)|g> + sqrt(1-p)|perp>`` with a seeded random ``|perp>``."""
    if not 0.0 < p <= 1.0:
        raise DomainError(f"overlap p must lie in (0, 1], got {p}")
    g = np.asarray(ground, dtype=complex)
    g = g / np.linalg.norm(g)
    if p == 1.0:
        return g.copy()
    perp = _orthogonal_unit(g, np.random.default_rng(seed))
    return np.sqrt(p) * g + np.sqrt(1.0 - p) * perp


def cheb_apply(series: ChebyshevSeries, a: DenseOperator, alpha: float,
               psi: np.ndarray) -> np.ndarray:
    """``P(a/alpha) psi`` by the three-term recurrence; ``psi`` may hold columns."""
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if a.norm() > alpha * (1.0 + 1e-12):
        raise DomainError("spectrum of a/alpha leaves [-1, 1]")
    m = a.matrix / alpha
    c = series.coeffs
    t_prev = np.asarray(psi, dtype=complex)
    out = c[0] * t_prev
    if c.size == 1:
        return out
    t_cur = m @ t_prev
    out = out + c[1] * t_cur
    for ck in c[2:]:
        t_prev, t_cur = t_cur, 2.0 * (m @ t_cur) - t_prev
        if ck != 0.0:
            out = out + ck * t_cur
    return out


def filter_parameters(spec: SpectralData, h1_norm: float, strict: bool = True) -> dict:
    """Window ``x_th = delta0/|h'|_1`` and transition width ``kappa``.

    The stop band starts at ``x_th + kappa`` while the first excited level of
    ``H'/|h'|_1`` can sit as low as ``(gap - delta0)/|h'|_1``. ``strict`` takes
    ``kappa = (gap - 2 delta0)/|h'|_1`` so that level is always suppressed;
    otherwise ``kappa = (gap - delta0)/|h'|_1`` as used by the cost model.
    """
    width = spec.gap_delta - (2.0 if strict else 1.0) * spec.delta0
    if width <= 0:
        raise ContractError("delta0 too large for the filter window")
    return {"x_th": spec.delta0 / h1_norm, "kappa": width / h1_norm}


def ptb_parameters(spec: SpectralData, h1_norm: float) -> dict:
    """``w = (gap - delta0)/|h'|_1`` and ``w0 = delta0/|h'|_1``."""
    return {"w": (spec.gap_delta - spec.delta0) / h1_norm, "w0": spec.delta0 / h1_norm}


def prepare_reference(filt: ChebyshevSeries, h_shifted: PauliSum, psi: np.ndarray,
                      ground: np.ndarray | None = None) -> dict:
    """Filter ``psi`` with ``P(H'/|h'|_1)`` and post-select."""
    hd = to_dense(h_shifted)
    alpha = norms(h_shifted, include_identity=True)["one_norm"]
    phi = cheb_apply(filt, hd, alpha, psi)
    prob = float(np.real(np.vdot(phi, phi)))
    if prob <= 0.0:
        raise ContractError("filtered state has zero norm")
    state = phi / np.sqrt(prob)
    if ground is None:
        ground = np.linalg.eigh(hd.matrix)[1][:, 0]
    fid = float(np.abs(np.vdot(ground, state)) ** 2)
    return {"state": state, "success_prob": prob, "fidelity": fid}


def residual_admixture(state: np.ndarray, r: float, seed: int,
                       observable: DenseOperator) -> dict:
    """Deviation of ``<O>`` after mixing in an orthogonal component of weight r."""
    if not 0.0 <= r < 1.0:
        raise DomainError("r must lie in [0, 1)")
    s = np.asarray(state, dtype=complex)
    s = s / np.linalg.norm(s)
    perp = _orthogonal_unit(s, np.random.default_rng(seed))
    mixed = np.sqrt(1.0 - r * r) * s + r * perp
    o = observable.matrix
    dev = abs(float(np.real(np.vdot(mixed, o @ mixed) - np.vdot(s, o @ s))))
    onorm = observable.norm()
    return {"deviation": dev, "bound": 2.0 * r * onorm + onorm * r * r}


def second_order_qsp(h_shifted: PauliSum, v: PauliSum, ptb: ChebyshevSeries, w: float,
                     spec: SpectralData, reference: np.ndarray,
                     want_per_term: bool = False, rtol: float = 1e-9) -> PerturbationReport:
    """Second-order energy from ``<V ref| P_ptb(H'/|h'|_1) |V ref>``.

    ``ptb`` must have been built with ``w = (gap - delta0)/|h'|_1`` and
    ``w0 = delta0/|h'|_1`` for this spectrum; its ``meta`` is checked.
    """
    h1 = norms(h_shifted, include_identity=True)["one_norm"]
    want = ptb_parameters(spec, h1)
    meta = ptb.meta
    if not np.isclose(w, want["w"], rtol=rtol, atol=0):
        raise ContractError(f"w={w} does not match (gap - delta0)/|h'|_1 = {want['w']}")
    for key in ("w", "w0"):
        if key in meta and not np.isclose(meta[key], want[key], rtol=rtol, atol=0):
            raise ContractError(f"polynomial built with {key}={meta[key]}, expected {want[key]}")
    epsilon = meta.get("epsilon")
    if epsilon is None:
        raise ContractError("polynomial carries no epsilon in its metadata")

    hd = to_dense(h_shifted)
    vd = to_dense(v)
    ref = np.asarray(reference, dtype=complex)
    phi = vd.matrix @ ref
    expval = float(np.real(np.vdot(phi, cheb_apply(ptb, hd, h1, phi))))
    e2_qsp = -2.0 / (w * h1) * expval

    e2_exact = exact_perturbation(hd, vd, spec)["e2"]
    e1 = float(np.real(np.vdot(ref, vd.matrix @ ref)))
    phinorm2 = float(np.real(np.vdot(phi, phi)))
    bound = phinorm2 * epsilon / h1 + spec.delta0 / (spec.gap_delta - spec.delta0) * abs(e2_exact)

    per_term = None
    if want_per_term:
        labels = v.labels(include_identity=True)
        coeffs = np.array([v.terms[s] for s in labels])
        sig_ref = np.stack([to_dense(PauliSum.from_terms({s: 1.0})).matrix @ ref
                            for s in labels], axis=1)
        applied = cheb_apply(ptb, hd, h1, sig_ref)
        per_term = np.real(sig_ref.conj().T @ applied)  # [l', l]
        agg = float(coeffs @ per_term @ coeffs)
        if abs(agg - expval) > 1e-9 * max(1.0, abs(expval)):
            raise ConsistencyError(f"per-term sum {agg} != aggregate {expval}")

    extras = {"epsilon_ptb": epsilon, "w": w, "w0": want["w0"], "h1_norm": h1,
              "ptb_degree": ptb.degree}
    return PerturbationReport(e1, e2_exact, e2_qsp, bound, per_term, extras)


def simulate(h: PauliSum, v: PauliSum, config: dict,
             degree_cap: int = chebpoly.DEFAULT_DEGREE_CAP) -> dict:
    """End-to-end dense run: spectrum, filtering, first and second order.

    ``config`` keys: ``p``, ``seed``, ``delta0``, ``epsilon_filter``,
    ``epsilon_ptb`` and optionally ``reference`` (``"exact"`` or
    ``"filtered"``, default ``"exact"``).
    """
    p = float(config["p"])
    seed = int(config.get("seed", 0))
    delta0 = float(config["delta0"])
    reference_mode = config.get("reference", "exact")
    if reference_mode not in ("exact", "filtered"):
        raise ContractError("reference must be 'exact' or 'filtered'")

    hd = to_dense(h)
    spec = exact_spectrum(hd, delta0, seed)
    if 2.0 * delta0 >= spec.gap_delta:
        raise ContractError("delta0 must be below half the spectral gap")
    h_shift = shift_identity(h, spec.eps_hat0)
    h1 = norms(h_shift, include_identity=True)["one_norm"]

    fp = filter_parameters(spec, h1)
    filt = chebpoly.build_filter(float(config["epsilon_filter"]), fp["kappa"], fp["x_th"],
                                 degree_cap)
    psi = make_initial_state(spec.ground_state, p, seed)
    prep = prepare_reference(filt, h_shift, psi, spec.ground_state)

    pp = ptb_parameters(spec, h1)
    ptb = chebpoly.build_ptb(float(config["epsilon_ptb"]), pp["w"], pp["w0"], degree_cap)
    ref = spec.ground_state if reference_mode == "exact" else prep["state"]
    report = second_order_qsp(h_shift, v, ptb, pp["w"], spec, ref, want_per_term=False)
    first = exact_perturbation(hd, to_dense(v), spec)

    out = report.to_dict()
    out.update({
        "e1": first["e1"],
        "e1_reference": float(np.real(np.vdot(prep["state"], to_dense(v).matrix @ prep["state"]))),
        "epsilon0": spec.epsilon0,
        "eps_hat0": spec.eps_hat0,
        "gap_delta": spec.gap_delta,
        "delta0": delta0,
        "reference": reference_mode,
        "success_prob": prep["success_prob"],
        "fidelity": prep["fidelity"],
        "filter_degree": filt.degree,
        "x_th": fp["x_th"],
        "kappa": fp["kappa"],
        "seed": seed,
        "p": p,
    })
    return out



def random_pauli_sum(n_qubits: int, n_terms: int, rng: np.random.Generator,
                     scale: float = 1.0) -> PauliSum:
    """Random real combination of non-identity Pauli strings."""
    ident = "I" * n_qubits
    items = []
    while len(items) < n_terms:
        label = "".join(rng.choice(list("IXYZ"), size=n_qubits))
        if label != ident:
            items.append((label, scale * rng.normal()))
    return PauliSum.from_terms(items, n_qubits)


def random_instance(n_qubits: int, rng: np.random.Generator, min_w: float = 0.03,
                    v_scale: float = 0.1, max_tries: int = 1000) -> dict:
    """Rejection-sample (H, V, delta0) whose ptb window ``w`` is at least ``min_w``.

    H is a random Z field plus weaker random couplings, which keeps the gap a
    sizeable fraction of the one-norm.

    ``delta0`` is a random fraction (at most a third) of the gap, so that
    ``w0 <= w / 2`` always holds. V is rescaled to ``v_scale`` times the gap in
    spectral norm.
    """
    for _ in range(max_tries):
        fields = [("I" * j + "Z" + "I" * (n_qubits - j - 1), rng.uniform(0.5, 1.5))
                  for j in range(n_qubits)]
        coupling = random_pauli_sum(n_qubits, int(rng.integers(1, 2 * n_qubits + 1)), rng,
                                    scale=0.3)
        h = PauliSum.from_terms(fields, n_qubits) + coupling
        evals = np.linalg.eigvalsh(to_dense(h).matrix)
        gap = evals[1] - evals[0]
        if gap < 1e-3:
            continue
        delta0 = float(rng.uniform(0.02, 1.0 / 3.0)) * gap
        h1 = norms(h)["one_norm"] + abs(evals[0]) + delta0
        if (gap - delta0) / h1 < min_w:
            continue
        v = random_pauli_sum(n_qubits, int(rng.integers(1, 2 * n_qubits + 1)), rng)
        vn = to_dense(v).norm()
        if vn < 1e-9:
            continue
        v = v.scaled(v_scale * gap / vn)
        return {"h": h, "v": v, "delta0": delta0, "gap": float(gap)}
    raise ContractError(f"no instance with w >= {min_w} after {max_tries} draws")


def lambda_sweep(h: DenseOperator, v: DenseOperator, lambdas=(0.02, 0.04, 0.08, 0.16),
                 e2: float | None = None) -> dict:
    """Residual of ``e0 + l e1 + l^2 e2`` against the exact ground energy of ``H + l V``.

    ``e2`` defaults to the exact second-order energy; pass a polynomial
    estimate to test it instead. Returns the residuals and their log-log slope.
    """
    spec = exact_spectrum(h)
    pe = exact_perturbation(h, v, spec)
    e2 = pe["e2"] if e2 is None else e2
    lam = np.asarray(lambdas, dtype=float)
    res = np.array([abs(np.linalg.eigvalsh(h.matrix + x * v.matrix)[0]
                        - (spec.epsilon0 + x * pe["e1"] + x * x * e2)) for x in lam])
    slope = float(np.polyfit(np.log(lam), np.log(res), 1)[0])
    return {"lambdas": lam, "residuals": res, "slope": slope}


def sweep_instance(n_qubits: int, rng: np.random.Generator, v_scale: float = 0.1) -> tuple:
    """(H, V) with a dense random V of spectral norm ``v_scale`` times the gap."""
    inst = random_instance(n_qubits, rng)
    v = random_pauli_sum(n_qubits, 4 * n_qubits, rng)
    v = v.scaled(v_scale * inst["gap"] / to_dense(v).norm())
    return inst["h"], v
