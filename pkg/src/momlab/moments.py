"""Moments over residues, moments of moments and their zero-sum expansions.

Notation in code: D(a, t) is the deviation of the weighted count in the
class a from its average over classes at x = e^t, M_n(t) the average of
D(a, t)^n over a, and m_n the time mean of M_n.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import simpson

from . import combinatorics as comb
from .arith import LambdaTable, character_group
from .explicit import _chi_values, prime_tail, psi_ap_series, psi_char_series, zero_side_series
from .weights import Kernel, Weight, beta_q
from .zeros import ZeroStore, zero_tail_bound

TUPLE_BUDGET = 10**8
PAIR_BUDGET = 2 * 10**9
IMAG_TOL = 1e-10
SIGMA_TOL = 1e-7


class BudgetError(RuntimeError):
    pass


@dataclass
class MomentReport:
    q: int
    n: int
    value: float
    s: int = 1
    x: float | None = None
    T: float | None = None
    eta: str = ""
    phi: str = ""
    main_term: float | None = None
    quad_err: float = 0.0
    trunc_err: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def budget(self) -> float:
        return self.quad_err + self.trunc_err

    @property
    def residual(self) -> float | None:
        return None if self.main_term is None else self.value - self.main_term

    def to_dict(self) -> dict:
        out = {
            "q": self.q,
            "n": self.n,
            "s": self.s,
            "x": self.x,
            "T": self.T,
            "eta": self.eta,
            "phi": self.phi,
            "value": self.value,
            "main_term": self.main_term,
            "residual": self.residual,
            "quad_err": self.quad_err,
            "trunc_err": self.trunc_err,
        }
        out.update({k: v for k, v in self.extra.items() if isinstance(v, (int, float, str, bool, type(None)))})
        return out


def _real(z, scale: float = 1.0):
    z = np.asarray(z)
    if np.iscomplexobj(z):
        bad = np.max(np.abs(z.imag), initial=0.0)
        if bad > IMAG_TOL * max(1.0, scale):
            raise ArithmeticError(f"imaginary residue {bad:.3g} exceeds tolerance")
        return z.real
    return z


# ---------------------------------------------------------------------------
# moments at a single x


def moment_residue_side(x: float, q: int, n: int, eta: Weight, table: LambdaTable) -> MomentReport:
    """(1/phi) sum_a (psi(x;q,a) - psi(x,chi0)/phi)^n over units a."""
    if q < 3:
        raise ValueError("q must be at least 3")
    ps, bnd = psi_ap_series([math.log(x)], q, eta, table)
    row = ps[0]
    phi = len(row)
    dev = row - math.fsum(row) / phi
    val = math.fsum(dev**n) / phi
    if n == 1:
        val = math.fsum(dev) / phi
    eps = float(deviation_tail([math.log(x)], q, eta, table, bnd)[0])
    err = math.fsum(n * (abs(d) + eps) ** (n - 1) * eps for d in dev) / phi
    return MomentReport(q, n, val, x=x, eta=eta.spec, trunc_err=err)


def deviation_tail(t, q: int, eta: Weight, table: LambdaTable, class_bound=None) -> np.ndarray:
    """Bound on the change of every deviation D(a, t) from primes beyond the table.

    The smaller of twice the class bound (no cancellation) and the average
    over non-principal characters of their tail bounds.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if class_bound is None:
        class_bound = np.array([prime_tail(eta, float(tt), float(table.limit), None, q) for tt in t])
    g = character_group(q)
    coprime = np.gcd(table.n, q) == 1
    chars = 0.0
    for c in g.nonprincipal():
        partial = float(abs(np.sum(np.where(coprime, table.lam * _chi_values(c, table.n), 0))))
        chars = chars + np.array([prime_tail(eta, float(tt), float(table.limit), partial, q) for tt in t])
    return np.minimum(2 * np.asarray(class_bound, dtype=float), chars / g.phi)


def _tuples(q: int, n: int, budget: int = TUPLE_BUDGET):
    """Tuples of non-principal Conrey labels with principal product."""
    g = character_group(q)
    labels = [c.conrey for c in g.nonprincipal()]
    total = len(labels) ** (n - 1)
    if total > budget:
        raise BudgetError(f"{total} character tuples exceed the budget of {budget}")
    one = 1 % q
    for head in itertools.product(labels, repeat=n - 1):
        prod = 1
        for c in head:
            prod = prod * c % q
        last = pow(prod, -1, q) if prod else None
        if last is None or last == one:
            continue
        yield head + (last,)


def moment_character_side(x: float, q: int, n: int, eta: Weight, table: LambdaTable, budget: int = TUPLE_BUDGET) -> MomentReport:
    """phi^{-n} sum over non-principal tuples with principal product of prod psi(x, chi_i)."""
    g = character_group(q)
    phi = g.phi
    t = [math.log(x)]
    psi = {}
    bnd = {}
    for c in g.nonprincipal():
        v, b = psi_char_series(t, q, c.conrey, eta, table)
        psi[c.conrey] = complex(v[0])
        bnd[c.conrey] = float(b[0])
    terms = []
    err = 0.0
    for tup in _tuples(q, n, budget):
        vals = [psi[c] for c in tup]
        terms.append(np.prod(vals))
        # |prod a_i - prod b_i| <= prod(|a_i| + e_i) - prod |a_i|
        err += float(np.prod([abs(v) + bnd[c] for v, c in zip(vals, tup)]) - np.prod([abs(v) for v in vals]))
    tot = complex(np.sum(terms)) / phi**n if terms else 0j
    val = float(_real(np.array([tot]), max(1.0, abs(tot)))[0])
    return MomentReport(q, n, val, x=x, eta=eta.spec, trunc_err=err / phi**n, extra={"tuples": len(terms)})


# ---------------------------------------------------------------------------
# Delta kernels


def _is_zero(v) -> bool:
    if isinstance(v, Counter):
        return all(c == 0 for c in v.values())
    if isinstance(v, (int, Fraction, np.integer)):
        return v == 0
    raise TypeError("exact mode needs integers, fractions or symbolic key counters")


def _add(vals):
    if vals and isinstance(vals[0], Counter):
        tot = Counter()
        for v in vals:
            tot.update(v)
        return tot
    return sum(vals, 0)


def delta_s(sigma) -> int:
    """Inclusion-exclusion form of the exact kernel: 1 iff the sum vanishes and no entry does."""
    s = len(sigma)
    if s < 1:
        raise ValueError("need at least one entry")
    zero = [_is_zero(v) for v in sigma]
    tot = 0
    for k in range(s + 1):
        for I in itertools.combinations(range(s), k):
            if any(not zero[m] for m in range(s) if m not in I):
                continue
            if _is_zero(_add([sigma[m] for m in I]) if I else 0):
                tot += (-1) ** (s - k)
    return tot


def delta_s_smoothed(sigma, kern: Kernel, T: float, zero=None) -> float:
    """Smoothed kernel with the transform of Phi at T * (partial sums) in place of the outer indicator.

    ``zero`` flags the entries that vanish exactly; by default an entry is
    zero when it compares equal to 0.
    """
    sig = [float(v) if not isinstance(v, Counter) else 0.0 for v in sigma]
    s = len(sig)
    zflags = list(zero) if zero is not None else [v == 0 for v in sig]
    p0 = float(kern.phi_hat(0.0))
    tot = 0.0
    for k in range(s + 1):
        for I in itertools.combinations(range(s), k):
            if any(not zflags[m] for m in range(s) if m not in I):
                continue
            tot += (-1) ** (s - k) * float(kern.phi_hat(T * sum(sig[m] for m in I)))
    return tot / p0


# ---------------------------------------------------------------------------
# zero arrays: rows of X_{1,n}


@dataclass
class Rows:
    q: int
    n: int
    T: float
    w: np.ndarray  # product of eta^ over the row
    sigma: np.ndarray  # sum of gammas / 2 pi
    zero: np.ndarray  # sigma vanishes symbolically
    owner: np.ndarray | None = None  # (rows, n) conjugate-orbit owner of each zero
    index: np.ndarray | None = None  # (rows, n) index of the zero in its owner's list
    sign: np.ndarray | None = None  # (rows, n) sign of each height

    def key(self, r: int) -> Counter:
        c = Counter()
        for o, i, g in zip(self.owner[r], self.index[r], self.sign[r]):
            c[(int(o), int(i))] += int(g)
        return c

    @property
    def nonzero(self) -> np.ndarray:
        return ~self.zero


def spectral_rows(q: int, n: int, weight: Weight, store: ZeroStore, T: float, budget: int = TUPLE_BUDGET) -> Rows:
    """All (character tuple, zero tuple) rows with |gamma| <= T, flagged by symbolic cancellation."""
    zl = {}
    for c in character_group(q).nonprincipal():
        gam, own, idx = store.signed(q, c.conrey, T)
        zl[c.conrey] = (gam, own, idx, np.real(weight.eta_hat(gam / (2 * math.pi))))
    ws, ss, os_, is_, gs = [], [], [], [], []
    size = 0
    for tup in _tuples(q, n, budget):
        parts = [zl[c] for c in tup]
        sizes = [len(p[0]) for p in parts]
        m = int(np.prod(sizes))
        size += m
        if size > budget:
            raise BudgetError(f"more than {budget} zero rows")
        if m == 0:
            continue
        grids = np.meshgrid(*[np.arange(k) for k in sizes], indexing="ij")
        flat = [g.ravel() for g in grids]
        sig = np.zeros(m)
        w = np.ones(m)
        for p, f in zip(parts, flat):
            sig += p[0][f]
            w *= p[3][f]
        sig /= 2 * math.pi
        own = np.stack([p[1][f] for p, f in zip(parts, flat)], axis=1)
        idx = np.stack([p[2][f] for p, f in zip(parts, flat)], axis=1)
        sgn = np.stack([np.sign(p[0][f]) for p, f in zip(parts, flat)], axis=1).astype(np.int8)
        ws.append(w)
        ss.append(sig)
        os_.append(own)
        is_.append(idx)
        gs.append(sgn)
    if not ws:
        e = np.empty((0, n), dtype=np.int64)
        return Rows(q, n, T, np.empty(0), np.empty(0), np.empty(0, dtype=bool), e, e, e.astype(np.int8))
    rows = Rows(q, n, T, np.concatenate(ws), np.concatenate(ss), None, np.concatenate(os_), np.concatenate(is_), np.concatenate(gs))
    # cancelling keys force |sigma| to rounding level; confirm symbolically
    rows.zero = np.zeros(len(rows.w), dtype=bool)
    for r in np.flatnonzero(np.abs(rows.sigma) < SIGMA_TOL):
        rows.zero[r] = _is_zero(rows.key(r))
    rows.sigma[rows.zero] = 0.0
    return rows


def _second_moments(q: int, weight: Weight, store: ZeroStore, T: float):
    """Per character: sum of eta^(gamma/2pi)^2 over |gamma| <= T and its tail bound."""
    out = {}
    for c in character_group(q).nonprincipal():
        gam, _, _ = store.signed(q, c.conrey, T)
        s2 = math.fsum(np.real(weight.eta_hat(gam / (2 * math.pi))) ** 2)
        env = _sq_envelope(weight)
        out[c.conrey] = (s2, zero_tail_bound(env, T, c.conductor))
    return out


def _sq_envelope(weight: Weight):
    from .explicit import _eta_hat_envelope

    g = _eta_hat_envelope(weight)
    return lambda u: g(u) ** 2


def spectral_mean(q: int, n: int, weight: Weight, store: ZeroStore, T: float, rows: Rows | None = None) -> tuple[float, float]:
    """m_n from the symbolically cancelling rows, with a truncation bound."""
    phi = character_group(q).phi
    if n % 2:
        return 0.0, 0.0
    rows = rows if rows is not None else spectral_rows(q, n, weight, store, T)
    val = (-1) ** n * math.fsum(rows.w[rows.zero]) / phi**n
    sm = _second_moments(q, weight, store, T)
    S = math.fsum(v[0] for v in sm.values())
    E = math.fsum(v[1] for v in sm.values())
    pairings = comb.mu(n)
    bound = pairings * ((S + E) ** (n // 2) - S ** (n // 2)) / phi**n
    return val, bound


def diagonal_lower_bound(q: int, n: int, weight: Weight, store: ZeroStore, T: float) -> float:
    """phi^{-n} (sum_chi b(chi; eta^2))^{n/2}: one fixed pairing of the rows, for even n."""
    if n % 2:
        raise ValueError("even n only")
    phi = character_group(q).phi
    sm = _second_moments(q, weight, store, T)
    return math.fsum(v[0] for v in sm.values()) ** (n // 2) / phi**n


def _pair_sum(a_w, a_s, b_w, b_s, f, budget: int, cut: float = math.inf, chunk: int = 2048) -> tuple[float, int]:
    """sum_{i,j} a_w[i] b_w[j] f(a_s[i] + b_s[j]) over pairs with |a_s[i] + b_s[j]| <= cut (at least).

    Returns the sum and the number of pairs evaluated; pairs further apart
    than ``cut`` may be skipped and are the caller's to bound.
    """
    ob = np.argsort(b_s)
    b_w, b_s = b_w[ob], b_s[ob]
    oa = np.argsort(a_s)
    a_w, a_s = a_w[oa], a_s[oa]
    tot = []
    done = 0
    for i in range(0, len(a_w), chunk):
        aw, as_ = a_w[i : i + chunk], a_s[i : i + chunk]
        lo = np.searchsorted(b_s, -as_[-1] - cut, side="left") if math.isfinite(cut) else 0
        hi = np.searchsorted(b_s, -as_[0] + cut, side="right") if math.isfinite(cut) else len(b_s)
        if hi <= lo:
            continue
        done += len(aw) * (hi - lo)
        if done > budget:
            raise BudgetError(f"more than {budget} row pairs")
        tot.append(float(aw @ f(as_[:, None] + b_s[None, lo:hi]) @ b_w[lo:hi]))
    return math.fsum(tot), done


def vsn_spectral_value(
    rows: Rows, s: int, kern: Kernel | None, T: float | None, phi: int, budget: int = PAIR_BUDGET, tol: float = 1e-7
) -> tuple[float, float]:
    """(-1)^{sn} phi^{-sn} sum over s-tuples of non-cancelling rows of prod w * Delta.

    ``kern`` None selects the exact kernel (T = infinity).  Returns the
    value and a bound for the tuples skipped because their frequency sum is
    so large that the kernel transform is below ``tol``.
    """
    n = rows.n
    w = rows.w[rows.nonzero]
    sig = rows.sigma[rows.nonzero]
    sign = (-1) ** (s * n) / phi ** (s * n)
    if kern is None:
        if s == 1:
            return 0.0, 0.0
        if s != 2:
            raise NotImplementedError("exact kernel implemented for s <= 2")
        return sign * _exact_pairs(rows), 0.0
    p0 = float(kern.phi_hat(0.0))

    def f(x):
        return kern.phi_hat(T * x) / p0

    if s == 1:
        return sign * math.fsum(w * f(sig)), 0.0
    if len(w) ** (s - 1) > budget:
        raise BudgetError(f"{len(w)}^{s - 1} row tuples exceed the budget of {budget}")
    # fold the first s-1 rows into a (weight, sigma) list, then pair with the last
    cw, cs = w.copy(), sig.copy()
    for _ in range(s - 2):
        cw = np.outer(cw, w).ravel()
        cs = np.add.outer(cs, sig).ravel()
    mass = float(np.sum(np.abs(cw)) * np.sum(np.abs(w)))
    cut = _cutoff(kern, T, tol / max(mass, 1e-300) * p0)
    val, _ = _pair_sum(cw, cs, w, sig, f, budget, cut)
    skipped = mass * kern.tail_sup(T * cut) / p0 if math.isfinite(cut) else 0.0
    return sign * val, skipped / phi ** (s * n)


def _cutoff(kern: Kernel, T: float, level: float) -> float:
    """Smallest c (on a doubling scale) with tail_sup(T c) <= level."""
    c = 1.0 / T
    while kern.tail_sup(T * c) > level:
        c *= 2
        if c > 1e12:
            return math.inf
    return c


def _exact_pairs(rows: Rows) -> float:
    """sum over pairs of non-cancelling rows whose keys cancel jointly, of w1 w2."""
    live = np.flatnonzero(rows.nonzero)
    order = live[np.argsort(rows.sigma[live])]
    srt = rows.sigma[order]
    keys = {}
    tot = []
    for r in live:
        target = -rows.sigma[r]
        lo = np.searchsorted(srt, target - SIGMA_TOL)
        hi = np.searchsorted(srt, target + SIGMA_TOL)
        if lo == hi:
            continue
        kr = keys.setdefault(r, rows.key(r))
        for r2 in order[lo:hi]:
            k2 = keys.setdefault(r2, rows.key(r2))
            if _is_zero(_merge(kr, k2)):
                tot.append(rows.w[r] * rows.w[r2])
    return math.fsum(tot)


def _merge(a: Counter, b: Counter) -> Counter:
    out = Counter(a)
    for k, v in b.items():
        out[k] += v
    return out


def vsn_spectral(
    T: float,
    q: int,
    s: int,
    n: int,
    eta: Weight,
    kern: Kernel | None,
    store: ZeroStore,
    T_zero: float,
    table: LambdaTable | None = None,
    step: float = 0.005,
    budget: int = PAIR_BUDGET,
) -> MomentReport:
    """Zero-sum side of V_{s,n}(T) from zeros with |gamma| <= T_zero.

    The budget propagates, through the zero-model trajectory, both the zero
    truncation and the size of the non-zero terms of the explicit formula
    (which the zero sum leaves out).
    """
    g = character_group(q)
    phi = g.phi
    rows = spectral_rows(q, n, eta, store, T_zero)
    val, skipped = vsn_spectral_value(rows, s, kern, T, phi, budget)
    m_n, m_b = spectral_mean(q, n, eta, store, T_zero, rows)
    rep = MomentReport(q, n, val, s=s, T=T, eta=eta.spec, phi=kern.name if kern else "exact")
    rep.extra.update({"rows": int(len(rows.w)), "cancelling_rows": int(rows.zero.sum()), "m_n": m_n, "m_bound": m_b, "T_zero": T_zero})
    if kern is None or table is None:
        rep.trunc_err = skipped if kern is None else math.nan
        return rep
    t = _tgrid(T * kern.support, step)
    D, eps = _deviations(t, q, eta, table, store, T_zero, mode="model")
    M = np.mean(D**n, axis=0)
    eM = np.mean(n * (np.abs(D) + eps) ** (n - 1), axis=0) * eps
    # the model mean from rows is exact for the truncated model: no m error here
    err = s * (np.abs(M - m_n) + eM) ** (s - 1) * eM
    wts = kern.phi(t / T) / (T * kern.int_pos)
    rep.trunc_err = float(simpson(wts * err, x=t)) + skipped
    rep.extra["model_bias_peak"] = float(np.max(eM))
    return rep


# ---------------------------------------------------------------------------
# trajectories and the quadrature side


def _tgrid(tmax: float, step: float) -> np.ndarray:
    m = int(math.ceil(tmax / step))
    m += m % 4  # divisible by 4 so the half grid also has an even number of intervals
    return np.linspace(0.0, tmax, m + 1)


def _deviations(t, q: int, weight: Weight, table: LambdaTable | None, store: ZeroStore | None, T_zero: float, mode: str = "auto"):
    """D(a, t) for every unit a (rows) and a uniform pointwise bound eps(t).

    mode "auto": psi from the side with the smaller bound; "prime": prime
    side only; "model": pure zero sums, with the omitted explicit-formula
    terms counted in eps.
    """
    g = character_group(q)
    phi = g.phi
    units = np.asarray(g.units)
    nonp = g.nonprincipal()
    psi = {}
    bnd = {}
    done = set()
    for c in nonp:
        if c.conrey in done:
            continue
        cc = g.conj(c)
        if mode == "prime" or store is None:
            v, b = psi_char_series(t, q, c.conrey, weight, table)
        else:
            zs = zero_side_series(t, q, c.conrey, weight, store, T_zero, table)
            if mode == "model":
                v, b = -zs.zeros, zs.bound + np.abs(zs.corrections)
            else:
                v, b = zs.value, zs.bound
                if table is not None and np.any(b > 1e-9):
                    need = np.flatnonzero(b > 1e-9)
                    pv, pb = _prime_where_cheap(t[need], q, c.conrey, weight, table)
                    better = pb < b[need]
                    v = v.copy()
                    b = np.array(b, dtype=float)
                    v[need[better]] = pv[better]
                    b[need[better]] = pb[better]
        psi[c.conrey], bnd[c.conrey] = v, np.broadcast_to(b, t.shape)
        psi[cc.conrey], bnd[cc.conrey] = np.conj(v), bnd[c.conrey]
        done.update({c.conrey, cc.conrey})
    P = np.array([psi[c.conrey] for c in nonp])
    B = np.array([bnd[c.conrey] for c in nonp])
    V = np.array([[np.conj(c(int(a))) for a in units] for c in nonp])  # chi x a
    D = _real(V.T @ P, 1.0) / phi
    eps = np.sum(B, axis=0) / phi
    return D, eps


def _prime_where_cheap(t, q, conrey, weight, table):
    from .explicit import window
    from .weights import ExpWeight

    if isinstance(weight, ExpWeight):
        return psi_char_series(t, q, conrey, weight, table)
    W = window(weight)
    ok = t + W <= math.log(table.limit)
    v = np.zeros(len(t), dtype=complex)
    b = np.full(len(t), np.inf)
    if np.any(ok):
        pv, pb = psi_char_series(t[ok], q, conrey, weight, table)
        v[ok], b[ok] = pv, pb
    return v, b


def moment_trajectory(t, q: int, n: int, weight: Weight, table, store=None, T_zero: float = 0.0, mode: str = "auto"):
    """M_n(e^t) on an array of t, with a pointwise bound."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    D, eps = _deviations(t, q, weight, table, store, T_zero, mode)
    M = np.mean(D**n, axis=0)
    err = np.mean(n * (np.abs(D) + eps) ** (n - 1), axis=0) * eps
    return M, err


def _simpson_pair(f, t):
    fine = simpson(f, x=t)
    coarse = simpson(f[::2], x=t[::2])
    return fine, abs(fine - coarse) / 15, abs(fine - coarse)


def vsn_empirical(
    T: float,
    q: int,
    s: int,
    n: int,
    eta: Weight,
    kern: Kernel,
    m_n: float,
    table: LambdaTable | None,
    store: ZeroStore | None = None,
    T_zero: float = 400.0,
    step: float = 0.002,
    m_bound: float = 0.0,
) -> MomentReport:
    """(1/(T int_0^inf Phi)) int_0^inf Phi(t/T) (M_n(e^t) - m_n)^s dt by composite Simpson."""
    t = _tgrid(T * kern.support, step)
    M, eM = moment_trajectory(t, q, n, eta, table, store, T_zero)
    wts = kern.phi(t / T) / (T * kern.int_pos)
    f = wts * (M - m_n) ** s
    val, qerr, raw = _simpson_pair(f, t)
    e = eM + m_bound
    prop = float(simpson(wts * s * (np.abs(M - m_n) + e) ** (s - 1) * e, x=t))
    rep = MomentReport(q, n, float(val), s=s, T=T, eta=eta.spec, phi=kern.name, quad_err=qerr, trunc_err=prop)
    rep.extra.update({"grid_points": len(t), "step": float(t[1] - t[0]), "doubling_delta": raw, "m_n": m_n})
    return rep


def time_mean(T: float, q: int, n: int, eta: Weight, table, store=None, T_zero: float = 400.0, step: float = 0.002):
    """(1/T) int_0^T M_n(e^t) dt with Simpson error estimate and propagated bound."""
    t = _tgrid(T, step)
    M, eM = moment_trajectory(t, q, n, eta, table, store, T_zero)
    val, qerr, _ = _simpson_pair(M / T, t)
    return float(val), qerr + float(simpson(eM, x=t)) / T


# ---------------------------------------------------------------------------
# predictions


@dataclass(frozen=True)
class MainTerms:
    q: int
    n: int
    s: int
    V_n: float
    moment: float  # prediction for V_{s,n}
    mean: float | None  # prediction for m_n, n even
    alpha: float
    beta: float


def main_terms(q: int, n: int, s: int, eta: Weight) -> MainTerms:
    h = eta.spectral()
    a = h.alpha()
    b = beta_q(h, q)
    phi = character_group(q).phi
    Vn = float(comb.nu(n)) * (a * math.log(q)) ** n / phi ** (n + 1)
    if s % 2 == 0:
        mom = comb.mu(s) * Vn ** (s // 2)
    elif s == 1:
        mom = 0.0
    else:
        r = (s - 1) // 2
        lead = math.factorial(2 * r + 1) / (2**r * math.factorial(r - 1))
        mom = (-1) ** n * lead * comb.theta(n, r) / math.sqrt(phi) * Vn ** (s / 2)
    mean = comb.mu(n) * ((a * math.log(q) + b) / phi) ** (n // 2) if n % 2 == 0 else None
    return MainTerms(q, n, s, Vn, mom, mean, a, b)


def moments_a1(
    T: float,
    q: int,
    m: int,
    eta: Weight,
    kern: Kernel,
    table: LambdaTable | None,
    store: ZeroStore | None = None,
    T_zero: float = 400.0,
    step: float = 0.002,
) -> MomentReport:
    """(1/(T int_0^inf Phi)) int_0^inf Phi(t/T) (psi(e^t;q,1) - psi(e^t,chi0)/phi)^{2m} dt."""
    t = _tgrid(T * kern.support, step)
    D, eps = _deviations(t, q, eta, table, store, T_zero)
    g = character_group(q)
    d1 = D[int(np.flatnonzero(g.units == 1)[0])]
    wts = kern.phi(t / T) / (T * kern.int_pos)
    f = wts * d1 ** (2 * m)
    val, qerr, _ = _simpson_pair(f, t)
    prop = float(simpson(wts * 2 * m * (np.abs(d1) + eps) ** (2 * m - 1) * eps, x=t))
    h = eta.spectral()
    pred = comb.mu(2 * m) * ((h.alpha() * math.log(q) + beta_q(h, q)) / g.phi) ** m
    rep = MomentReport(q, 2 * m, float(val), T=T, eta=eta.spec, phi=kern.name, main_term=pred, quad_err=qerr, trunc_err=prop)
    rep.extra["ratio"] = float(val) / pred if pred else math.nan
    return rep


# ---------------------------------------------------------------------------
# search harnesses


@dataclass
class Hit:
    x: float
    value: float
    threshold: float
    bound: float
    residue: int | None = None

    def to_dict(self) -> dict:
        return {"x": self.x, "value": self.value, "threshold": self.threshold, "bound": self.bound, "residue": self.residue}


def omega_search(q: int, eta: Weight, x_grid, epsilon: float, table: LambdaTable, mode: str = "m2", m: int = 1, c: float = 1.0) -> list[Hit]:
    """Grid points where the moment (or the raw deviation) clears its threshold.

    mode "m2": M_2 >= (1-eps) alpha log q / phi;
    mode "m2m": M_{2m} >= (1-eps) mu_{2m} (alpha log q / phi)^m;
    mode "raw": |psi(x;q,a) - psi(x,chi0)/phi| >= c sqrt(x log q / phi), unsmoothed.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    phi = character_group(q).phi
    if mode == "raw":
        return _raw_hits(q, x_grid, table, c)
    a = eta.spectral().alpha()
    nn = 2 if mode == "m2" else 2 * m
    thr = (1 - epsilon) * comb.mu(nn) * (a * math.log(q) / phi) ** (nn // 2)
    t = np.log(x_grid)
    ps, bnd = psi_ap_series(t, q, eta, table)
    dev = ps - ps.sum(axis=1, keepdims=True) / phi
    M = np.mean(dev**nn, axis=1)
    eps = deviation_tail(t, q, eta, table, bnd)
    err = np.mean(nn * (np.abs(dev) + eps[:, None]) ** (nn - 1), axis=1) * eps
    return [Hit(float(x), float(v), thr, float(e)) for x, v, e in zip(x_grid, M, err) if v >= thr]


def raw_deviations(q: int, x_grid, table: LambdaTable) -> np.ndarray:
    """psi(x;q,a) - psi(x,chi0)/phi for every x (rows) and unit a (columns), unsmoothed."""
    g = character_group(q)
    units = np.asarray(g.units)
    pos = np.full(q, -1)
    pos[units] = np.arange(len(units))
    r = pos[table.n % q]
    keep = r >= 0
    n, lam, r = table.n[keep], table.lam[keep], r[keep]
    out = np.zeros((len(x_grid), len(units)))
    order = np.argsort(x_grid)
    xs = np.asarray(x_grid, dtype=float)[order]
    if xs[-1] > table.limit:
        raise ValueError("prime table shorter than the largest x")
    cuts = np.searchsorted(n, xs, side="right")
    acc = np.zeros(len(units))
    prev = 0
    for i, cut in zip(order, cuts):
        acc += np.bincount(r[prev:cut], weights=lam[prev:cut], minlength=len(units))
        prev = cut
        out[i] = acc
    return out - out.mean(axis=1, keepdims=True)


def _raw_hits(q, x_grid, table, c):
    phi = character_group(q).phi
    units = character_group(q).units
    dev = raw_deviations(q, x_grid, table)
    hits = []
    for i, x in enumerate(x_grid):
        thr = c * math.sqrt(x * math.log(q) / phi)
        for j in np.flatnonzero(np.abs(dev[i]) >= thr):
            hits.append(Hit(float(x), float(dev[i, j]), thr, 0.0, int(units[j])))
    return hits


@dataclass
class Histogram:
    x: float
    q: int
    edges: np.ndarray
    counts: np.ndarray
    tails: list  # (V, empirical fraction >= V, gaussian tail)


def gaussian_tail(v: float) -> float:
    return 0.5 * math.erfc(v / math.sqrt(2))


def distribution_histogram(x: float, q: int, bins: int, table: LambdaTable, tail_points=(0.0, 0.5, 1.0, 1.5, 1.96, 2.5)) -> Histogram:
    """Histogram over residues of the normalised unsmoothed deviation."""
    phi = character_group(q).phi
    dev = raw_deviations(q, [x], table)[0]
    v = dev * math.sqrt(phi) / math.sqrt(x * math.log(q))
    counts, edges = np.histogram(v, bins=bins)
    tails = [(float(V), float(np.mean(v >= V)), gaussian_tail(V)) for V in tail_points]
    return Histogram(x, q, edges, counts, tails)
