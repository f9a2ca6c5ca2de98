"""Chebyshev-series approximants used by the QSP perturbation algorithm.

Everything lives on [-1, 1] in the Chebyshev basis ``sum_k c_k T_k(x)``.
Builders return :class:`ChebyshevSeries` values with definite parity where
the construction guarantees it; degree formulas return plain reals so that
table-scale degrees (1e6 and beyond) never need coefficient vectors.

Accuracy splitting used by the builders (all certified on grids by the
tests):

* erf: Chebyshev truncation of ``erf(kx)`` with L-inf tail <= eps/2, then
  divided by ``1 + eps/2`` so that ``|P| <= 1`` holds by construction.
* sign: ``k`` chosen so ``erf(k x)`` is eps/2-close to ``sign(x)`` for
  ``|x| > kappa/2``; the erf polynomial contributes the other eps/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import fft
from scipy.special import erf, gammaln, ive

from .errors import CapacityError, DomainError, ParseError

DEFAULT_DEGREE_CAP = 100_000
DEFAULT_TOL_BOUND = 1e-12

_PARITIES = ("even", "odd", "none")


# --------------------------------------------------------------------------
# series type
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChebyshevSeries:
    """Immutable Chebyshev series with parity metadata.

    ``coeffs[k]`` multiplies ``T_k``. Trailing zeros are trimmed, so
    ``degree`` is the index of the last nonzero coefficient (0 for the zero
    series). ``meta`` records construction parameters (e.g. the ``w``/``w0``
    of a perturbation polynomial) for downstream contract checks.
    """

    coeffs: np.ndarray
    parity: str = "none"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            c = np.zeros(1)
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite Chebyshev coefficient")
        nz = np.flatnonzero(c)
        c = c[: (nz[-1] + 1 if nz.size else 1)].copy()
        c.setflags(write=False)
        if self.parity not in _PARITIES:
            raise ValueError(f"parity must be one of {_PARITIES}, got {self.parity!r}")
        if self.parity == "even" and np.any(c[1::2] != 0):
            raise ValueError("even series has nonzero odd-index coefficients")
        if self.parity == "odd" and np.any(c[0::2] != 0):
            raise ValueError("odd series has nonzero even-index coefficients")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def degree(self) -> int:
        return int(self.coeffs.size - 1)

    def __call__(self, x):
        return eval_series(self, x)

    def __len__(self):
        return self.coeffs.size

    def __eq__(self, other):
        if not isinstance(other, ChebyshevSeries):
            return NotImplemented
        return self.parity == other.parity and np.array_equal(self.coeffs, other.coeffs)

    def scaled(self, factor: float) -> "ChebyshevSeries":
        return ChebyshevSeries(self.coeffs * factor, self.parity, self.meta)

    def reflected(self) -> "ChebyshevSeries":
        """Series of ``x -> P(-x)``."""
        signs = np.where(np.arange(self.coeffs.size) % 2, -1.0, 1.0)
        return ChebyshevSeries(self.coeffs * signs, self.parity, self.meta)


def infer_parity(coeffs: Sequence[float]) -> str:
    c = np.asarray(coeffs, dtype=float)
    if not np.any(c[1::2]):
        return "even"
    if not np.any(c[0::2]):
        return "odd"
    return "none"


def with_parity(coeffs, parity: str, meta: dict | None = None) -> ChebyshevSeries:
    """Build a series, zeroing the coefficients that ``parity`` forbids."""
    c = np.array(coeffs, dtype=float)
    if parity == "even":
        c[1::2] = 0.0
    elif parity == "odd":
        c[0::2] = 0.0
    return ChebyshevSeries(c, parity, meta or {})


# --------------------------------------------------------------------------
# evaluation and arithmetic
# --------------------------------------------------------------------------


def _clenshaw(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    b1 = np.zeros_like(x)
    b2 = np.zeros_like(x)
    x2 = 2.0 * x
    for ck in c[:0:-1]:
        b1, b2 = ck + x2 * b1 - b2, b1
    return c[0] + x * b1 - b2


def eval_series(series: ChebyshevSeries, x):
    """Evaluate by Clenshaw's backward recurrence. Scalars in, scalars out."""
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > 1.0):
        raise DomainError("Chebyshev series evaluated outside [-1, 1]")
    out = _clenshaw(series.coeffs, xa)
    return float(out) if out.ndim == 0 else out


def chebyshev_nodes(n: int) -> np.ndarray:
    """First-kind nodes ``cos(pi (k + 1/2) / n)``, descending."""
    k = np.arange(n)
    return np.cos(np.pi * (k + 0.5) / n)


def values_at_nodes(series: ChebyshevSeries, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Values on ``n`` first-kind Chebyshev nodes, via DCT-III when degree < n."""
    x = chebyshev_nodes(n)
    c = series.coeffs
    if c.size > n:
        return x, _clenshaw(c, x)
    buf = np.zeros(n)
    buf[: c.size] = c
    buf[1:] *= 0.5
    return x, fft.dct(buf, type=3)


def interpolate(func: Callable[[np.ndarray], np.ndarray], degree: int) -> np.ndarray:
    """Chebyshev coefficients of the degree-``degree`` interpolant at first-kind nodes."""
    n = degree + 1
    x = chebyshev_nodes(n)
    c = fft.dct(func(x), type=2) / n
    c[0] *= 0.5
    return c


def multiply(a: ChebyshevSeries, b: ChebyshevSeries,
             degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Exact product using ``T_m T_n = (T_{m+n} + T_{|m-n|}) / 2``."""
    if a.degree + b.degree > degree_cap:
        raise CapacityError(f"product degree {a.degree + b.degree} exceeds cap {degree_cap}")
    ca, cb = a.coeffs, b.coeffs
    full = np.convolve(ca, cb)
    # cross[i] = sum_{m-n = i - (len(cb)-1)} ca[m] cb[n]
    cross = np.convolve(ca, cb[::-1])
    mid = cb.size - 1
    out = 0.5 * full
    pos = cross[mid:]
    neg = cross[:mid + 1][::-1]
    out[: pos.size] += 0.5 * pos
    out[1: neg.size] += 0.5 * neg[1:]
    parity = _product_parity(a.parity, b.parity)
    return with_parity(out, parity)


def _product_parity(pa: str, pb: str) -> str:
    if "none" in (pa, pb):
        return "none"
    return "even" if pa == pb else "odd"


def compose_affine(series: ChebyshevSeries, scale: float, shift: float) -> ChebyshevSeries:
    """Re-expand ``x -> P(scale * x + shift)`` in the Chebyshev basis of ``x``.

    Requires ``|scale| + |shift| <= 1`` so the argument stays in [-1, 1].
    Exact interpolation at ``degree + 1`` nodes; cost is O(degree^2).
    """
    if abs(scale) + abs(shift) > 1.0 + 1e-15:
        raise DomainError("affine map leaves [-1, 1]")
    c = series.coeffs

    def f(x):
        return _clenshaw(c, np.clip(scale * x + shift, -1.0, 1.0))

    return ChebyshevSeries(interpolate(f, series.degree), "none", series.meta)


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    sup_norm: float
    parity_ok: bool
    grid_points: int
    admissible: bool

    def to_dict(self) -> dict:
        return {"sup_norm": self.sup_norm, "parity_ok": self.parity_ok,
                "grid_points": self.grid_points, "admissible": self.admissible}


def certify_admissible(series: ChebyshevSeries, grid_points: int = 100_000,
                       tol_bound: float = DEFAULT_TOL_BOUND) -> AdmissibilityReport:
    """Check ``|P| <= 1`` on Chebyshev nodes plus endpoints, and definite parity."""
    if grid_points < 2:
        raise DomainError("grid_points must be >= 2")
    _, vals = values_at_nodes(series, grid_points)
    ends = eval_series(series, np.array([-1.0, 1.0]))
    sup = float(max(np.max(np.abs(vals)), np.max(np.abs(ends))))
    parity_ok = infer_parity(series.coeffs) != "none"
    return AdmissibilityReport(sup, parity_ok, grid_points,
                               bool(sup <= 1.0 + tol_bound and parity_ok))


def region_grid(lo: float, hi: float, grid_points: int = 100_000,
                local_points: int = 2048) -> np.ndarray:
    """Certification points strictly inside ``(lo, hi)``.

    Global Chebyshev nodes falling in the interval, plus a local Chebyshev
    grid on the interval, plus both ends pulled inward by half a local step.
    """
    if not hi > lo:
        return np.empty(0)
    half = 0.5 * (hi - lo) / local_points
    a, b = lo + half, hi - half
    xg = chebyshev_nodes(grid_points)
    inside = xg[(xg > a) & (xg < b)]
    t = chebyshev_nodes(local_points)
    local = 0.5 * (a + b) + 0.5 * (b - a) * t
    return np.concatenate([inside, local, [a, b]])


def max_deviation(series: ChebyshevSeries, target: Callable[[np.ndarray], np.ndarray],
                  intervals: Iterable[tuple[float, float]], grid_points: int = 100_000,
                  local_points: int = 2048) -> float:
    """Max of ``|P(x) - target(x)|`` over certification grids of the open intervals."""
    xg, vg = values_at_nodes(series, grid_points)
    worst = 0.0
    for lo, hi in intervals:
        if not hi > lo:
            continue
        half = 0.5 * (hi - lo) / local_points
        a, b = lo + half, hi - half
        mask = (xg > a) & (xg < b)
        if np.any(mask):
            worst = max(worst, float(np.max(np.abs(vg[mask] - target(xg[mask])))))
        t = chebyshev_nodes(local_points)
        xl = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * t, [a, b]])
        worst = max(worst, float(np.max(np.abs(_clenshaw(series.coeffs, xl) - target(xl)))))
    return worst


def _regions(kind: str, m: dict) -> list[tuple[str, list[tuple[float, float]], Callable, float]]:
    """(name, intervals, target, allowed) for each defining property of ``kind``."""
    eps = m["epsilon"]
    if kind in ("erf", "gaussian"):
        if kind == "erf":
            def target(x):
                return erf(m["k"] * (x - m.get("shift_c", 0.0)))
        else:
            def target(x):
                return np.exp(-m["beta"] * x * x)
        return [("approximation", [(-1.0, 1.0)], target, eps)]
    if kind == "sign":
        c, h = m["c"], m["kappa"] / 2.0
        return [("sign", [(-1.0, min(1.0, c - h)), (max(-1.0, c + h), 1.0)],
                 lambda x: np.sign(x - c), eps)]
    if kind == "filter":
        a, b = m["x_th"], min(1.0, m["x_th"] + m["kappa"])
        return [("pass band", [(-a, a)], lambda x: np.ones_like(x), eps),
                ("stop band", [(-1.0, -b), (b, 1.0)], np.zeros_like, eps)]
    if kind == "rect":
        w = m["w"]
        return [("pass band", [(-1.0, -w), (w, 1.0)], lambda x: np.ones_like(x), eps),
                ("stop band", [(-w / 2.0, w / 2.0)], np.zeros_like, eps)]
    if kind == "inverse":
        w = m["w"]
        return [("inverse", [(-1.0, -w), (w, 1.0)], lambda x: 1.0 / x, 2.0 * eps)]
    if kind == "ptb":
        w, w0 = m["w"], m["w0"]
        return [("inverse", [(-1.0, -w), (w, 1.0)], lambda x: 0.5 * w / x, 0.5 * w * eps),
                ("dead zone", [(-w0, w0)], np.zeros_like, 0.5 * w * eps)]
    raise DomainError(f"no property set for kind {kind!r}")


def check_properties(series: ChebyshevSeries, grid_points: int = 100_000,
                     tol_bound: float = DEFAULT_TOL_BOUND) -> dict:
    """Measure every defining inequality of a built polynomial.

    ``series.meta["kind"]`` selects the properties. The 1/x approximant is
    exempt from the sup-norm check since it reaches about 1/w.
    """
    kind = series.meta.get("kind")
    checks = []
    for name, intervals, target, allowed in _regions(kind, series.meta):
        if name == "pass band":
            # deficit 1 - P only; the upper side is covered by the sup norm
            measured = max_deviation(series, lambda x: np.maximum(_clenshaw(series.coeffs, x), 1.0),
                                     intervals, grid_points)
        else:
            measured = max_deviation(series, target, intervals, grid_points)
        checks.append({"name": name, "measured": measured, "allowed": allowed,
                       "ok": bool(measured <= allowed)})
    rep = certify_admissible(series, grid_points, tol_bound)
    if kind != "inverse":
        checks.append({"name": "sup norm", "measured": rep.sup_norm,
                       "allowed": 1.0 + tol_bound, "ok": bool(rep.sup_norm <= 1.0 + tol_bound)})
    if kind in ("filter", "rect", "inverse", "ptb", "gaussian") or (
            kind in ("erf", "sign") and series.meta.get("shift_c", series.meta.get("c", 0.0)) == 0.0):
        checks.append({"name": "parity", "measured": float(not rep.parity_ok), "allowed": 0.0,
                       "ok": rep.parity_ok})
    return {"kind": kind, "degree": series.degree, "checks": checks,
            "ok": all(c["ok"] for c in checks)}


# --------------------------------------------------------------------------
# degree formulas
# --------------------------------------------------------------------------


def lambert_w(x: float) -> float:
    """Principal branch of the Lambert W function for ``x >= 0``."""
    x = float(x)
    if not x >= 0.0 or math.isinf(x):
        raise DomainError(f"lambert_w needs finite x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if x < 1e2:
        w = math.log1p(x)
        for _ in range(100):
            ew = math.exp(w)
            f = w * ew - x
            step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0))
            w -= step
            if abs(step) <= 1e-16 * max(1.0, abs(w)):
                break
        return w
    # Newton on w + ln w = ln x avoids overflow of e^w
    lx = math.log(x)
    w = lx - math.log(lx)
    for _ in range(100):
        step = (w + math.log(w) - lx) / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-16 * w:
            break
    return w


def _check_eps(epsilon: float):
    if not 0.0 < epsilon < 1.0:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")


def inversion_degrees(epsilon: float, w: float) -> tuple[int, int]:
    """``(b, D)`` of the 1/x approximant; natural logs, ceilings as written."""
    _check_eps(epsilon)
    if not 0.0 < w < 1.0:
        raise DomainError(f"w must lie in (0, 1), got {w}")
    b = math.ceil((1.0 / w) ** 2 * math.log(1.0 / (w * epsilon)))
    b = max(b, 1)
    d = math.ceil(math.sqrt(b * math.log(4.0 * b / epsilon)))
    return b, d


def degree_sign(epsilon: float, kappa: float, c: float) -> float:
    """Real-valued degree estimate for an eps-approximation of ``sign(x - c)``."""
    _check_eps(epsilon)
    if not kappa > 0.0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    if abs(c) > 1.0:
        raise DomainError(f"|c| must be <= 1, got {c}")
    e2 = epsilon * epsilon
    return (32.0 * (1.0 + abs(c)) / (math.sqrt(math.pi) * epsilon) / kappa
            * math.sqrt(2.0 * math.log(8.0 / (math.pi * e2)))
            * math.exp(-0.5 * lambert_w(128.0 / (math.pi * e2 * math.e ** 2))))


def degree_filter(epsilon: float, kappa: float, x_th: float) -> dict:
    """Filter degree: closed form and its elementary upper bound."""
    _check_eps(epsilon)
    if not x_th > 0.0 or not kappa > 0.0:
        raise DomainError("x_th and kappa must be positive")
    xp = x_th + kappa / 2.0
    exact = degree_sign(epsilon, kappa, xp)
    e2 = epsilon * epsilon
    arg = 128.0 / (math.pi * e2 * math.e ** 2)
    upper = (4.0 * math.e * (1.0 + xp) / kappa
             * math.sqrt(math.log(8.0 / (math.pi * e2)) * math.log(arg)))
    return {"exact": exact, "upper_bound": upper, "w_argument": arg}


def degree_ptb(epsilon: float, w: float, w0: float) -> dict:
    """Degree of the perturbation polynomial, its inner eps'' and D."""
    _check_eps(epsilon)
    if not 0.0 < w < 1.0:
        raise DomainError(f"w must lie in (0, 1), got {w}")
    if not w0 > 0.0:
        raise DomainError("w0 must be positive (dead-zone branch diverges at 0)")
    if not w0 < w:
        raise DomainError("w0 must be smaller than w")
    _, d = inversion_degrees(epsilon / 4.0, w / 2.0)
    eps_dd = min(2.0 * epsilon * w / 5.0,
                 1.0 / (4.0 * w * d),
                 epsilon / (2.0 * w0 * (d + 1) ** 2))
    n = 2 * d + degree_sign(eps_dd, w / 4.0, 3.0 * w / 4.0)
    return {"n_ptb": n, "eps_dd": eps_dd, "D": d}


def gaussian_degree(beta: float, epsilon: float) -> int:
    """Degree sufficient for an eps-approximation of ``exp(-beta x^2)``."""
    m = max(beta * math.e ** 2, math.log(2.0 / epsilon))
    return 2 * math.ceil(math.sqrt(2.0 * m * math.log(4.0 / epsilon)))


def sign_steepness(epsilon: float, kappa: float) -> float:
    """``k`` making ``erf(k x)`` eps-close to ``sign(x)`` for ``|x| > kappa/2``."""
    return math.sqrt(2.0 * math.log(2.0 / (math.pi * epsilon * epsilon))) / kappa


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def _bessel_terms(z: float, tol: float) -> np.ndarray:
    """``exp(-z) I_j(z)`` for j = 0.. until terms drop far below ``tol``."""
    jmax = int(6.0 * math.sqrt(max(z, 1.0))) + 32
    while True:
        j = np.arange(jmax + 1)
        t = ive(j, z)
        tail = t[-8:]
        if np.all(tail < tol * 1e-20) or jmax > 50_000_000:
            return t
        jmax *= 2


def _truncate(coeffs: np.ndarray, eta: float, step: int, start: int) -> int:
    """Smallest index n (n = start mod step) with sum_{m>n} |coeffs[m]| <= eta."""
    abs_c = np.abs(coeffs)
    tail = np.cumsum(abs_c[::-1])[::-1]  # tail[m] = sum_{i >= m}
    tail = np.append(tail, 0.0)
    for n in range(start, coeffs.size, step):
        if tail[n + 1] <= eta:
            return n
    return coeffs.size - 1


def build_gaussian(beta: float, epsilon: float,
                   degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Even series within eps of ``exp(-beta x^2)`` on [-1, 1], bounded by 1."""
    _check_eps(epsilon)
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    eta = epsilon / 2.0
    t = _bessel_terms(beta / 2.0, eta)
    g = np.zeros(2 * t.size - 1)
    g[0] = t[0]
    g[2::2] = 2.0 * t[1:] * np.where(np.arange(1, t.size) % 2, -1.0, 1.0)
    n = _truncate(g, eta, 2, 0)
    if n > degree_cap:
        raise CapacityError(f"gaussian degree {n} exceeds cap {degree_cap}")
    return with_parity(g[: n + 1] / (1.0 + eta), "even",
                       {"kind": "gaussian", "beta": beta, "epsilon": epsilon})


def _erf_coefficients(k: float, eta: float) -> np.ndarray:
    """Chebyshev coefficients of ``erf(k x)`` (odd indices), to negligible tail."""
    z = 0.5 * k * k
    t = _bessel_terms(z, eta)
    j = np.arange(t.size - 1)
    pref = 2.0 * k / math.sqrt(math.pi)
    a_odd = pref * np.where(j % 2, -1.0, 1.0) * (t[:-1] + t[1:]) / (2 * j + 1)
    a = np.zeros(2 * j.size)
    a[1::2] = a_odd
    return a


def build_erf(k: float, epsilon: float, shift_c: float = 0.0,
              degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Polynomial approximant of ``erf(k (x - c))`` bounded by 1 on [-1, 1].

    With ``c = 0`` the result is odd and within ``epsilon`` of ``erf(kx)``.
    Otherwise the erf approximant of steepness ``(1+|c|) k`` is composed with
    ``(x - c) / (1 + |c|)`` and re-expanded.
    """
    _check_eps(epsilon)
    if not k > 0.0:
        raise DomainError("k must be positive")
    if abs(shift_c) > 1.0:
        raise DomainError("|shift_c| must be <= 1")
    ks = (1.0 + abs(shift_c)) * k
    eta = epsilon / 2.0
    a = _erf_coefficients(ks, eta)
    n = _truncate(a, eta, 2, 1)
    if n > degree_cap:
        raise CapacityError(f"erf degree {n} exceeds cap {degree_cap}")
    meta = {"kind": "erf", "k": k, "epsilon": epsilon, "shift_c": shift_c}
    base = with_parity(a[: n + 1] / (1.0 + eta), "odd", meta)
    if shift_c == 0.0:
        return base
    s = 1.0 + abs(shift_c)
    return compose_affine(base, 1.0 / s, -shift_c / s)


def build_sign(epsilon: float, kappa: float, c: float = 0.0,
               degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Approximant of ``sign(x - c)``, eps-accurate where ``|x - c| > kappa/2``."""
    _check_eps(epsilon)
    if not kappa > 0.0:
        raise DomainError("kappa must be positive")
    k = sign_steepness(epsilon / 2.0, kappa)
    p = build_erf(k, epsilon / 2.0, c, degree_cap)
    return ChebyshevSeries(p.coeffs, p.parity,
                           {"kind": "sign", "epsilon": epsilon, "kappa": kappa, "c": c})


def _sign_pair_sum(epsilon: float, kappa: float, c: float, degree_cap: int) -> np.ndarray:
    """Coefficients of ``P_c(x) + P_c(-x)`` (exactly even)."""
    p = build_sign(epsilon, kappa, c, degree_cap)
    out = 2.0 * p.coeffs
    out[1::2] = 0.0
    return out


def build_filter(epsilon: float, kappa: float, x_th: float,
                 degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Even window: > 1-eps for ``|x| < x_th``, below eps for ``|x| > x_th + kappa``.

    The negative-shift step is taken as ``-P_c(-x)`` so the window
    ``(P_{-c} - P_c) / 2`` comes out with exact even parity.
    """
    _check_eps(epsilon)
    if not x_th > 0.0 or not kappa > 0.0:
        raise DomainError("x_th and kappa must be positive")
    if not kappa < 2.0 * (1.0 - x_th):
        raise DomainError("need kappa < 2 (1 - x_th)")
    c = x_th + kappa / 2.0
    coeffs = -0.5 * _sign_pair_sum(epsilon, kappa, c, degree_cap)
    return with_parity(coeffs, "even",
                       {"kind": "filter", "epsilon": epsilon, "kappa": kappa, "x_th": x_th})


def build_rect(epsilon: float, w: float,
               degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Even step: > 1-eps on ``w < |x| < 1``, below eps on ``|x| < w/2``."""
    _check_eps(epsilon)
    if not 0.0 < w < 1.0:
        raise DomainError("w must lie in (0, 1)")
    coeffs = 0.5 * _sign_pair_sum(epsilon, w / 4.0, 3.0 * w / 4.0, degree_cap)
    coeffs[0] += 1.0
    coeffs /= 1.0 + epsilon / 2.0
    return with_parity(coeffs, "even", {"kind": "rect", "epsilon": epsilon, "w": w})


def inverse_coefficients(b: int, d: int) -> np.ndarray:
    """``c_j = 4 * 2^{-2b} * sum_{i=j+1}^{b} C(2b, b+i)`` for j = 0..d.

    Binomial weights are formed in log space; the partial sums are
    accumulated from the small tail upwards.
    """
    if b < 1:
        raise DomainError("b must be >= 1")
    i = np.arange(1, b + 1)
    logw = (gammaln(2 * b + 1) - gammaln(b + i + 1) - gammaln(b - i + 1)
            - 2 * b * math.log(2.0))
    weights = np.exp(logw)
    tail = np.cumsum(weights[::-1])[::-1]  # tail[j] = sum_{i >= j+1}
    out = np.zeros(d + 1)
    m = min(d + 1, b)
    out[:m] = 4.0 * tail[:m]
    return out


def build_inverse(epsilon: float, w: float,
                  degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Odd approximant of 1/x, within 2 eps on ``w <= |x| <= 1``."""
    b, d = inversion_degrees(epsilon, w)
    if 2 * d + 1 > degree_cap:
        raise CapacityError(f"inverse degree {2 * d + 1} exceeds cap {degree_cap}")
    cj = inverse_coefficients(b, d)
    coeffs = np.zeros(2 * d + 2)
    coeffs[1::2] = cj * np.where(np.arange(d + 1) % 2, -1.0, 1.0)
    return with_parity(coeffs, "odd",
                       {"kind": "inverse", "epsilon": epsilon, "w": w, "b": b, "D": d})


def build_ptb(epsilon: float, w: float, w0: float,
              degree_cap: int = DEFAULT_DEGREE_CAP) -> ChebyshevSeries:
    """Odd approximant of ``w / (2x)`` on ``w < |x| < 1`` that vanishes near 0.

    Product of the 1/x approximant (accuracy eps/4, threshold w/2) and the
    rectangle at eps''; see :func:`degree_ptb`.
    """
    info = degree_ptb(epsilon, w, w0)
    if w0 > w / 2.0:
        # the rectangle only suppresses |x| < w/2
        raise DomainError("dead-zone half-width w0 must not exceed w/2")
    inv = build_inverse(epsilon / 4.0, w / 2.0, degree_cap)
    rect = build_rect(info["eps_dd"], w, degree_cap)
    prod = multiply(inv, rect, degree_cap)
    meta = {"kind": "ptb", "epsilon": epsilon, "w": w, "w0": w0,
            "eps_dd": info["eps_dd"], "D": info["D"], "degree_estimate": info["n_ptb"]}
    return with_parity(0.5 * w * prod.coeffs, "odd", meta)


# --------------------------------------------------------------------------
# text serialization
# --------------------------------------------------------------------------


def dumps_series(series: ChebyshevSeries) -> str:
    lines = [f"chebyshev parity={series.parity} degree={series.degree}"]
    lines += [repr(float(c)) for c in series.coeffs]
    return "\n".join(lines) + "\n"


def loads_series(text: str) -> ChebyshevSeries:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("chebyshev"):
        raise ParseError("missing 'chebyshev' header line")
    fields = dict(tok.split("=", 1) for tok in lines[0].split()[1:] if "=" in tok)
    try:
        parity = fields["parity"]
        degree = int(fields["degree"])
        coeffs = [float(v) for v in lines[1:]]
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad series text: {exc}") from None
    if len(coeffs) != degree + 1:
        raise ParseError(f"header says degree {degree} but {len(coeffs)} coefficients follow")
    try:
        return ChebyshevSeries(np.array(coeffs), parity)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
