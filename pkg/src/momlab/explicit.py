"""Weighted prime sums psi_eta and their zero-side expansions.

All public functions take x and work with t = log x internally.  The
zero side is the full Weil form: the truncated zero sum plus the gamma
factor term, the dual prime sum and the archimedean integral, so that
the only error left is truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .arith import Character, LambdaTable, character_group, factorize
from .weights import BumpConvWeight, ClassicalWeight, ExpWeight, GaussConvWeight, Weight, digamma
from .zeros import ZeroStore, grh_envelope, log_quad, zero_tail_bound

PSI_BOUND_CONST = 1.04  # psi(u) <= 1.04 u for all u > 0
NEGLIGIBLE = 1e-22


class TableTooSmall(RuntimeError):
    pass


@dataclass(frozen=True)
class PsiValue:
    value: complex
    bound: float
    side: str

    def __float__(self) -> float:
        return float(np.real(self.value))


def window(weight: Weight, tol: float = NEGLIGIBLE) -> float:
    """Half-width W with |eta(u)| <= tol for |u| > W."""
    s = abs(weight.scale)
    if s == 0:
        return 0.0
    if isinstance(weight, ExpWeight):
        return max(0.0, math.log(s / tol) / weight.K)
    if isinstance(weight, GaussConvWeight):
        return math.sqrt(max(0.0, 2 * math.log(s / (math.sqrt(2) * tol)) / math.pi))
    if isinstance(weight, BumpConvWeight):
        return weight.support
    if isinstance(weight, ClassicalWeight):
        return max(0.0, 2 * math.log(s / tol))
    return math.inf


def _chi_values(chi: Character, n: np.ndarray) -> np.ndarray:
    k = chi.logs[n % chi.modulus]
    return np.where(k >= 0, np.exp(2j * np.pi * np.maximum(k, 0) / chi.exponent), 0)


def _primitive(chi: Character) -> Character:
    return chi if chi.is_primitive else chi.primitive()


# ---------------------------------------------------------------------------
# prime side


def _tail_terms(weight: Weight, t: float, N: float):
    """f(u) = u^{-1/2} eta(log u - t) and |f'(u)| for the partial-summation tail."""

    def f(u):
        return u**-0.5 * float(np.atleast_1d(weight.eta(math.log(u) - t))[0])

    def df(u):
        lu = math.log(u) - t
        e = float(np.atleast_1d(weight.eta(lu))[0])
        d = float(np.atleast_1d(weight.deriv(lu))[0])
        return abs(u**-1.5 * (d - 0.5 * e))

    return f, df


def prime_tail(weight: Weight, t: float, N: float, partial: float | None, q: int) -> float:
    """Bound for the prime sum over n > N at x = e^t.

    With ``partial`` None the coefficients are treated as non-negative and
    psi(u) <= 1.04 u is used; otherwise ``partial`` = |sum_{n<=N} Lambda chi|
    and the GRH-type envelope bounds the character sum beyond N.
    """
    if weight.scale == 0:
        return 0.0
    if isinstance(weight, ClassicalWeight):
        return 0.0 if math.log(N) >= t else math.inf
    W = window(weight)
    if math.log(N) - t >= W:
        return NEGLIGIBLE * 3 * math.sqrt(N)
    f, df = _tail_terms(weight, t, N)
    if isinstance(weight, ExpWeight) and math.log(N) >= t:
        K, x, c = weight.K, math.exp(t), abs(weight.scale)
        if partial is None:
            return PSI_BOUND_CONST * c * x**K * N ** (0.5 - K) * (1 + (K + 0.5) / (K - 0.5))
        return partial * c * x**K * N ** (-0.5 - K) + c * x**K * (K + 0.5) * _grh_moment(q, N, K)
    upper = math.exp(t + W) if math.isfinite(W) else math.inf
    pts = [N, max(N, math.exp(t)), upper] if math.exp(t) > N else [N, upper]
    tot = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        if partial is None:
            tot += log_quad(lambda u: u * df(u), lo, hi)
        else:
            tot += log_quad(lambda u: float(grh_envelope(u, q)) * df(u), lo, hi)
    if partial is None:
        return PSI_BOUND_CONST * (N * abs(f(N)) + tot)
    return partial * abs(f(N)) + tot


@lru_cache(maxsize=256)
def _grh_moment(q: int, N: float, K: float) -> float:
    """int_N^inf B(u) u^{-3/2-K} du for the GRH envelope B, in closed form."""
    L = math.log(q * N)
    return N**-K * (L * L / K + 2 * L / K**2 + 2 / K**3) / math.pi


def _coeffs(table: LambdaTable, vals: np.ndarray | None) -> np.ndarray:
    return table.lam if vals is None else table.lam * vals


def _prime_sum(weight: Weight, t: np.ndarray, table: LambdaTable, coef: np.ndarray) -> np.ndarray:
    """sum_n coef(n) n^{-1/2} eta(log n - t) for every t."""
    n = table.n.astype(float)
    ln = np.log(n)
    out = np.zeros(len(t), dtype=complex)
    if weight.scale == 0:
        return out
    if isinstance(weight, ExpWeight):
        # split at n <= x: prefix sums make every t an O(log N) lookup
        K = weight.K
        lo = np.concatenate([[0], np.cumsum(coef * np.exp((K - 0.5) * ln))])
        hi_terms = coef * np.exp((-K - 0.5) * ln)
        hi = np.concatenate([np.cumsum(hi_terms[::-1])[::-1], [0]])
        idx = np.searchsorted(ln, t, side="right")
        return weight.scale * (np.exp(-K * t) * lo[idx] + np.exp(K * t) * hi[idx])
    W = window(weight)
    for i, tt in enumerate(t):
        a = np.searchsorted(ln, tt - W, side="left")
        b = np.searchsorted(ln, tt + W, side="right")
        seg = slice(a, b)
        out[i] = np.sum(coef[seg] * n[seg] ** -0.5 * weight.eta(ln[seg] - tt))
    return out


def psi_char_series(t, q: int, conrey: int, weight: Weight, table: LambdaTable):
    """Prime-side psi_eta(e^t, chi) and truncation bounds on an array of t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    chi = character_group(q)[conrey]
    vals = _chi_values(chi, table.n)
    vals = np.where(np.gcd(table.n, q) == 1, vals, 0)
    coef = _coeffs(table, vals)
    val = _prime_sum(weight, t, table, coef)
    partial = None if chi.is_principal else float(abs(np.sum(coef)))
    bnd = np.array([prime_tail(weight, float(tt), float(table.limit), partial, q) for tt in t])
    return val, bnd


def psi_eta_char(x: float, q: int, conrey: int, eta: Weight, table: LambdaTable, tol: float | None = None) -> PsiValue:
    """sum_n Lambda(n) chi(n) n^{-1/2} eta(log(n/x)) from the prime table."""
    if x <= 0:
        raise ValueError("x must be positive")
    v, b = psi_char_series([math.log(x)], q, conrey, eta, table)
    if tol is not None and b[0] > tol:
        raise TableTooSmall(f"tail bound {b[0]:.3g} exceeds tol {tol:.3g}; enlarge the prime table")
    return PsiValue(complex(v[0]), float(b[0]), "prime")


def psi_ap_series(t, q: int, weight: Weight, table: LambdaTable, residues=None):
    """psi_eta(e^t; q, a) for every unit a (or the given residues): shape (len t, len a)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    res = np.asarray(residues if residues is not None else character_group(q).units)
    r = table.n % q
    out = np.empty((len(t), len(res)))
    for j, a in enumerate(res):
        coef = np.where(r == a % q, table.lam, 0.0) if q > 1 else table.lam
        out[:, j] = np.real(_prime_sum(weight, t, table, coef))
    bnd = np.array([prime_tail(weight, float(tt), float(table.limit), None, q) for tt in t])
    return out, bnd


def psi_eta_ap(x: float, q: int, a: int, eta: Weight, table: LambdaTable, tol: float | None = None) -> PsiValue:
    """sum over n = a mod q of Lambda(n) n^{-1/2} eta(log(n/x))."""
    if x <= 0:
        raise ValueError("x must be positive")
    if math.gcd(a, q) != 1:
        raise ValueError("a must be coprime to q")
    v, b = psi_ap_series([math.log(x)], q, eta, table, [a])
    if tol is not None and b[0] > tol:
        raise TableTooSmall(f"tail bound {b[0]:.3g} exceeds tol {tol:.3g}; enlarge the prime table")
    return PsiValue(float(v[0, 0]), float(b[0]), "prime")


# ---------------------------------------------------------------------------
# zero side


def gamma_factor_constant(chi: Character) -> float:
    """log(q*/pi) + digamma(1/4 + a/2) for the primitive character inducing chi."""
    return math.log(chi.conductor / math.pi) + digamma(0.25 + 0.5 * chi.parity)


class ArchimedeanTerm:
    """t -> int_0^inf e^{-(1/2+a)x}/(1-e^{-2x}) (2 eta(t) - eta(t+x) - eta(t-x)) dx.

    Evaluated by adaptive quadrature on a node grid and interpolated with a
    cubic spline; the interpolation error is estimated from a half-density
    spline at the skipped nodes.
    """

    STEP = 0.02

    def __init__(self, weight: Weight, parity: int):
        self.weight = weight
        self.shift = 0.5 + parity
        self._nodes = np.empty(0)
        self._vals = np.empty(0)
        self._errs = np.empty(0)
        self._spline = None
        self.interp_err = 0.0

    def direct(self, t: float) -> tuple[float, float]:
        w, c = self.weight, self.shift
        e0 = float(np.atleast_1d(w.eta(t))[0])

        def f(x):
            if x == 0:
                return 0.0
            g = 2 * e0 - float(np.atleast_1d(w.eta(t + x))[0]) - float(np.atleast_1d(w.eta(t - x))[0])
            return math.exp(-c * x) * g / (-math.expm1(-2 * x))

        W = window(w)
        X = max(t + W, 60.0 / c) if math.isfinite(W) else 60.0 / c + t
        pts = sorted({0.0, min(abs(t), X), min(abs(t) + 1, X), X})
        val, err = 0.0, 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi > lo:
                v, e = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
                val += v
                err += e
        # beyond X: |integrand| <= 4 max|eta| e^{-cx}/(1-e^{-2x})
        err += 4 * abs(self.weight.scale) * math.exp(-c * X) / (c * (-math.expm1(-2 * X)))
        return val, err

    def _extend(self, tmax: float) -> None:
        if len(self._nodes) and self._nodes[-1] >= tmax:
            return
        n = int(math.ceil(tmax / self.STEP)) + 4
        nodes = np.arange(n + 1) * self.STEP
        start = len(self._nodes)
        vals = list(self._vals)
        errs = list(self._errs)
        for tt in nodes[start:]:
            v, e = self.direct(float(tt))
            vals.append(v)
            errs.append(e)
        self._nodes, self._vals, self._errs = nodes, np.array(vals), np.array(errs)
        self._spline = CubicSpline(self._nodes, self._vals)
        coarse = CubicSpline(self._nodes[::2], self._vals[::2])
        self.interp_err = float(np.max(np.abs(coarse(self._nodes[1::2]) - self._vals[1::2])))

    def __call__(self, t) -> tuple[np.ndarray, float]:
        t = np.abs(np.atleast_1d(np.asarray(t, dtype=float)))
        if self.weight.scale == 0:
            return np.zeros(len(t)), 0.0
        self._extend(float(np.max(t)))
        return self._spline(t), self.interp_err + float(np.max(self._errs))


_ARCH: dict = {}


def archimedean_term(weight: Weight, parity: int) -> ArchimedeanTerm:
    key = (weight, parity)
    if key not in _ARCH:
        _ARCH[key] = ArchimedeanTerm(weight, parity)
    return _ARCH[key]


def _dual_sum(weight: Weight, t: np.ndarray, prim: Character, table: LambdaTable) -> tuple[np.ndarray, np.ndarray]:
    """sum_n Lambda(n) n^{-1/2} conj(chi*(n)) eta(t + log n) for t >= 0, with tail bounds."""
    n = table.n
    ln = np.log(n.astype(float))
    coef = table.lam * np.conj(_chi_values(prim, n))
    N = float(table.limit)
    if weight.scale == 0:
        return np.zeros(len(t), dtype=complex), np.zeros(len(t))
    if isinstance(weight, ExpWeight):
        K, c = weight.K, abs(weight.scale)
        S = np.sum(coef * np.exp((-K - 0.5) * ln))
        tail = PSI_BOUND_CONST * c * N ** (0.5 - K) * (1 + (K + 0.5) / (K - 0.5))
        return weight.scale * np.exp(-K * t) * S, tail * np.exp(-K * t)
    W = window(weight)
    m = ln <= W
    vals = np.array([np.sum(coef[m] * np.exp(-0.5 * ln[m]) * weight.eta(tt + ln[m])) for tt in t])
    bnd = np.zeros(len(t)) if math.log(N) >= W else np.array([prime_tail(weight, -tt, N, None, prim.modulus) for tt in t])
    return vals, bnd + NEGLIGIBLE * 3 * math.sqrt(N)


def ramified_series(t, chi: Character, weight: Weight) -> np.ndarray:
    """psi_eta(e^t, chi) - psi_eta(e^t, chi*): minus the chi* terms at primes dividing q only."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    prim = _primitive(chi)
    out = np.zeros(len(t), dtype=complex)
    if chi.is_primitive:
        return out
    W = window(weight)
    kmax_t = float(np.max(t)) + (W if math.isfinite(W) else 60.0)
    for p, _ in factorize(chi.modulus):
        if prim.modulus % p == 0:
            continue  # chi*(p^k) = 0
        lp = math.log(p)
        for k in range(1, int(kmax_t / lp) + 2):
            v = prim(p**k)
            out -= v * lp * p ** (-k / 2) * weight.eta(k * lp - t)
    return out


def ramified_diff(x: float, q: int, conrey: int, table: LambdaTable, eta: Weight) -> complex:
    """psi_eta(x, chi) - psi_eta(x, chi*) from the primes dividing q."""
    return complex(ramified_series([math.log(x)], character_group(q)[conrey], eta)[0])


def zero_sum_series(t, q: int, conrey: int, weight: Weight, store: ZeroStore, T: float):
    """sum over signed zeros |gamma| <= T of eta^(gamma/2pi) e^{i gamma t}, with tail bound."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    gam, _, _ = store.signed(q, conrey, T)
    w = np.real(weight.eta_hat(gam / (2 * math.pi)))
    out = np.empty(len(t), dtype=complex)
    for i in range(0, len(t), 2048):
        out[i : i + 2048] = np.exp(1j * np.outer(t[i : i + 2048], gam)) @ w
    qchi = character_group(q)[conrey].conductor
    return out, zero_tail_bound(_eta_hat_envelope(weight), T, qchi) if weight.scale else 0.0


def _eta_hat_envelope(weight: Weight):
    """Non-increasing majorant of u -> |eta^(u / 2 pi)|."""
    if isinstance(weight, (ExpWeight, GaussConvWeight)):
        return lambda u: abs(float(np.atleast_1d(weight.eta_hat(u / (2 * math.pi)))[0]))
    grid = np.concatenate([np.linspace(0, 50, 2001), np.geomspace(50.01, 1e5, 2000)])
    vals = np.abs(weight.eta_hat(grid / (2 * math.pi)))
    env = np.maximum.accumulate(vals[::-1])[::-1]
    return lambda u: float(np.interp(u, grid, env)) if u <= grid[-1] else float(env[-1] * (grid[-1] / u) ** 2)


@dataclass
class ZeroSide:
    """Pieces of the Weil-completed zero side of psi_eta(e^t, chi)."""

    zeros: np.ndarray
    gamma_term: np.ndarray
    dual: np.ndarray
    arch: np.ndarray
    ramified: np.ndarray
    bound: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return -self.zeros + self.gamma_term - self.dual + self.arch + self.ramified

    @property
    def corrections(self) -> np.ndarray:
        return self.value + self.zeros


def zero_side_series(t, q: int, conrey: int, weight: Weight, store: ZeroStore, T: float, table: LambdaTable) -> ZeroSide:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("zero side is implemented for x >= 1")
    chi = character_group(q)[conrey]
    if chi.is_principal:
        raise ValueError("non-principal character required")
    if not isinstance(weight, (ExpWeight, GaussConvWeight, BumpConvWeight)) or not weight.admissible:
        raise ValueError(f"weight {weight.spec} has no zero-side expansion here")
    prim = _primitive(chi)
    zs, ztail = zero_sum_series(t, q, conrey, weight, store, T)
    gterm = gamma_factor_constant(chi) * weight.eta(t)
    dual, dbound = _dual_sum(weight, t, prim, table)
    arch, aerr = archimedean_term(weight, chi.parity)(t)
    ram = ramified_series(t, chi, weight)
    return ZeroSide(zs, gterm, dual, arch, ram, ztail + dbound + aerr)


def psi_eta_zero_side(
    x: float, q: int, conrey: int, eta: Weight, store: ZeroStore, T: float, table: LambdaTable, corrections: bool = True
) -> PsiValue:
    """psi_eta(x, chi) from zeros with |gamma| <= T.

    With ``corrections`` off only -sum e^{i gamma log x} eta^(gamma/2pi) is
    returned and the remaining terms are folded into the bound.
    """
    if x < 1:
        raise ValueError("x must be at least 1")
    zs = zero_side_series([math.log(x)], q, conrey, eta, store, T, table)
    if corrections:
        return PsiValue(complex(zs.value[0]), float(zs.bound[0]), "zero")
    return PsiValue(complex(-zs.zeros[0]), float(zs.bound[0] + abs(zs.corrections[0])), "zero")


def weil_residual(x: float, q: int, conrey: int, eta: Weight, store: ZeroStore, T: float, table: LambdaTable) -> tuple[float, float]:
    """|zero sum - (gamma term - two-sided prime sum + archimedean integral)| for chi*.

    Returns (residual, bound) where bound collects every truncation bound.
    """
    t = math.log(x)
    chi = character_group(q)[conrey]
    prim = _primitive(chi)
    zs = zero_side_series([t], q, conrey, eta, store, T, table)
    pv, pb = psi_char_series([t], prim.modulus, prim.conrey, eta, table)
    rhs = zs.gamma_term[0] - pv[0] - zs.dual[0] + zs.arch[0]
    return float(abs(zs.zeros[0] - rhs)), float(zs.bound[0] + pb[0])


def psi_hybrid_series(t, q: int, conrey: int, weight: Weight, table: LambdaTable, store: ZeroStore | None, T: float):
    """psi_eta(e^t, chi) from whichever side carries the smaller bound at each t.

    Returns (values, bounds, used_zero_side mask).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pv, pb = psi_char_series(t, q, conrey, weight, table)
    if store is None:
        return pv, pb, np.zeros(len(t), dtype=bool)
    zs = zero_side_series(t, q, conrey, weight, store, T, table)
    use = zs.bound < pb
    return np.where(use, zs.value, pv), np.where(use, zs.bound, pb), use
