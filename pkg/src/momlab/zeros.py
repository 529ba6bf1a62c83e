"""Zeros of Dirichlet L-functions and sums over them.

The engine evaluates L(1/2+it, chi) for primitive chi through Hurwitz zeta
values (Euler-Maclaurin), rotates it to a real function with the root
number, brackets sign changes and bisects.  Zero lists store positive
heights only; the negative heights of chi are the positive heights of its
conjugate with the sign flipped.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, special

from . import arith
from .arith import Character, character_group
from .weights import EULER_GAMMA, Kernel, SpectralWeight, digamma

EM_TERMS = 20
BISECT_TOL = 1e-9
MAX_REFINE = 4


class ZeroFormatError(ValueError):
    pass


class CompletenessError(RuntimeError):
    pass


class InsufficientZeros(RuntimeError):
    pass


class ZeroBudgetError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Hurwitz zeta and L(s, chi)

_B2 = special.bernoulli(2 * EM_TERMS + 2)[2::2]  # B_2, B_4, ...
_EM_COEF = np.array([_B2[j] / math.factorial(2 * j + 2) for j in range(EM_TERMS)])


def hurwitz_zeta(s, a: float, N: int | None = None) -> np.ndarray:
    """zeta(s, a) for 0 < a <= 1 by Euler-Maclaurin summation, vectorised in s."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    if N is None:
        N = int(np.max(np.abs(s)) / math.pi) + 12
    k = np.arange(N) + a
    logk = np.log(k)
    head = np.exp(-np.outer(s, logk)).sum(axis=1)
    x = N + a
    lx = math.log(x)
    xs = np.exp(-s * lx)
    out = head + x * xs / (s - 1) + 0.5 * xs
    # rising factorial s(s+1)...(s+2j), power x^{-s-2j-1}
    rise = s.copy()
    powx = xs / x
    for j in range(EM_TERMS):
        out = out + _EM_COEF[j] * rise * powx
        rise = rise * (s + 2 * j + 1) * (s + 2 * j + 2)
        powx = powx / (x * x)
    return out


@dataclass(frozen=True)
class LData:
    """Primitive character data needed by the engine."""

    modulus: int
    conrey: int
    parity: int
    values: np.ndarray
    root_number: complex

    @classmethod
    def of(cls, chi: Character) -> "LData":
        prim = chi.primitive() if chi.conductor != chi.modulus else chi
        k = prim.modulus
        vals = prim.values
        tau = complex(np.sum(vals * np.exp(2j * np.pi * np.arange(k) / k)))
        eps = tau / ((1j ** prim.parity) * math.sqrt(k))
        return cls(k, prim.conrey, prim.parity, vals, eps)


def l_value(s, chi: Character) -> np.ndarray:
    """L(s, chi*) for the primitive character inducing chi."""
    d = LData.of(chi)
    return _l_value(np.atleast_1d(np.asarray(s, dtype=complex)), d)


def _l_value(s: np.ndarray, d: LData) -> np.ndarray:
    k = d.modulus
    acc = np.zeros(len(s), dtype=complex)
    for a in range(1, k + 1):
        v = d.values[a % k]
        if v == 0:
            continue
        acc += v * hurwitz_zeta(s, a / k)
    return np.exp(-s * math.log(k)) * acc


def hardy_z(t, chi: Character, chunk: int = 512) -> np.ndarray:
    """Real function with the same zeros as L(1/2+it, chi*)."""
    d = LData.of(chi)
    return _hardy(np.atleast_1d(np.asarray(t, dtype=float)), d, chunk)


def _hardy(t: np.ndarray, d: LData, chunk: int = 512, check: bool = False) -> np.ndarray:
    out = np.empty(len(t))
    rot = 1 / np.sqrt(d.root_number)
    for i in range(0, len(t), chunk):
        tt = t[i : i + chunk]
        s = 0.5 + 1j * tt
        theta = 0.5 * tt * math.log(d.modulus / math.pi) + np.imag(special.loggamma((0.5 + d.parity + 1j * tt) / 2))
        z = rot * np.exp(1j * theta) * _l_value(s, d)
        if check and np.max(np.abs(z.imag)) > 1e-6 * max(1.0, float(np.max(np.abs(z.real)))):
            raise AssertionError("rotated L-value is not real")
        out[i : i + chunk] = z.real
    return out


# ---------------------------------------------------------------------------
# zero counting


def count_main(T: float, qchi: int) -> float:
    """Main term (T/pi) log(q T / 2 pi e) for zeros with |gamma| <= T."""
    if T <= 0:
        return 0.0
    return T / math.pi * math.log(qchi * T / (2 * math.pi * math.e))


def count_tolerance(T: float, qchi: int) -> float:
    return 2 * math.log(qchi * (T + 2)) + 5


def count_check(n_both: int, T: float, qchi: int) -> tuple[bool, float]:
    err = n_both - count_main(T, qchi)
    return abs(err) <= count_tolerance(T, qchi), err


def _grid_step(T: float, k: int) -> float:
    return 2 * math.pi / (16 * math.log(max(k * max(T, 1.0) / (2 * math.pi), math.e)))


def _hurwitz_rows(k: int, s: np.ndarray, chunk: int = 256) -> np.ndarray:
    """zeta(s, a/k) for a = 1..k as a (k, len(s)) array."""
    out = np.empty((k, len(s)), dtype=complex)
    for i in range(0, len(s), chunk):
        ss = s[i : i + chunk]
        for a in range(1, k + 1):
            out[a - 1, i : i + chunk] = hurwitz_zeta(ss, a / k)
    return out


def _theta(t: np.ndarray, k: int, parity: int) -> np.ndarray:
    return 0.5 * t * math.log(k / math.pi) + np.imag(special.loggamma((0.5 + parity + 1j * t) / 2))


def _hardy_from_rows(rows: np.ndarray, t: np.ndarray, d: LData) -> np.ndarray:
    k = d.modulus
    s = 0.5 + 1j * t
    lv = np.exp(-s * math.log(k)) * (d.values[np.arange(1, k + 1) % k] @ rows)
    z = np.exp(1j * _theta(t, k, d.parity)) * lv / np.sqrt(d.root_number)
    if np.max(np.abs(z.imag), initial=0.0) > 1e-6 * max(1.0, float(np.max(np.abs(z.real), initial=0.0))):
        raise AssertionError("rotated L-value is not real")
    return z.real


def _refine(d: LData, lo: np.ndarray, hi: np.ndarray, flo: np.ndarray, fhi: np.ndarray) -> np.ndarray:
    """Illinois iteration on sign brackets until each bracket is narrower than BISECT_TOL.

    Once the iterate settles, a bracket of width below BISECT_TOL around it is
    tested directly; if that fails the iteration simply continues.
    """
    lo, hi, flo, fhi = lo.copy(), hi.copy(), flo.copy(), fhi.copy()
    side = np.zeros(len(lo), dtype=int)
    prev = np.full(len(lo), np.nan)
    for it in range(200):
        act = np.flatnonzero((hi - lo) > BISECT_TOL)
        if not len(act):
            break
        a, b, fa, fb = lo[act], hi[act], flo[act], fhi[act]
        if it % 8 == 7:
            x = 0.5 * (a + b)
        else:
            x = np.clip((a * fb - b * fa) / (fb - fa), a + 0.1 * BISECT_TOL, b - 0.1 * BISECT_TOL)
        fx = _hardy(x, d)
        left = np.sign(fx) == np.sign(fa)
        sd = side[act]
        fb = np.where(left & (sd == 1), fb / 2, fb)
        fa = np.where(~left & (sd == -1), fa / 2, fa)
        a = np.where(left, x, a)
        fa = np.where(left, fx, fa)
        b = np.where(left, b, x)
        fb = np.where(left, fb, fx)
        side[act] = np.where(left, 1, -1)
        settled = np.abs(x - prev[act]) < 0.05 * BISECT_TOL
        prev[act] = x
        if np.any(settled):
            j = np.flatnonzero(settled & ((b - a) > BISECT_TOL))
            if len(j):
                u = np.maximum(x[j] - 0.45 * BISECT_TOL, a[j])
                v = np.minimum(x[j] + 0.45 * BISECT_TOL, b[j])
                fu, fv = _hardy(u, d), _hardy(v, d)
                ok = np.sign(fu) * np.sign(fv) < 0
                jj = j[ok]
                a[jj], b[jj], fa[jj], fb[jj] = u[ok], v[ok], fu[ok], fv[ok]
        lo[act], hi[act], flo[act], fhi[act] = a, b, fa, fb
    return 0.5 * (lo + hi)


def _find_many(ds: list[LData], T: float, step: float) -> list[np.ndarray]:
    """Zeros in (0, T] for several primitive characters sharing one modulus."""
    k = ds[0].modulus
    n = max(2, int(math.ceil(T / step)) + 1)
    t = np.linspace(0.0, T, n)
    t[0] = 1e-6
    rows = _hurwitz_rows(k, 0.5 + 1j * t)
    out = []
    for d in ds:
        z = _hardy_from_rows(rows, t, d)
        idx = np.flatnonzero(np.sign(z[:-1]) * np.sign(z[1:]) < 0)
        exact = t[np.flatnonzero(z == 0)]
        roots = _refine(d, t[idx], t[idx + 1], z[idx], z[idx + 1]) if len(idx) else np.empty(0)
        roots = np.concatenate([roots, exact])
        out.append(np.sort(roots[roots > 0]))
    return out


def _find(d: LData, T: float, step: float) -> np.ndarray:
    return _find_many([d], T, step)[0]


_ENGINE_CACHE: dict[tuple, np.ndarray] = {}


def _grid_ready(ds: list[LData], T: float, step: float) -> list[np.ndarray]:
    todo = [d for d in ds if (d.modulus, d.conrey, T, step) not in _ENGINE_CACHE]
    if todo:
        for d, zs in zip(todo, _find_many(todo, T, step)):
            _ENGINE_CACHE[(d.modulus, d.conrey, T, step)] = zs
    return [_ENGINE_CACHE[(d.modulus, d.conrey, T, step)] for d in ds]


def compute_zeros_many(q: int, conreys, T: float) -> dict[int, np.ndarray]:
    """Positive heights in (0, T] for several characters mod q, each count-checked.

    Conjugates are computed alongside, since the count formula covers both
    signs.  Characters with a common conductor share one Hurwitz grid.
    """
    if not 3 <= q <= 100:
        raise ValueError("engine supports 3 <= q <= 100")
    if T > 500:
        raise ValueError("engine supports T <= 500")
    group = character_group(q)
    labels = sorted({c for x in conreys for c in (x, _conj_label(q, x))})
    for c in labels:
        if group[c].is_principal:
            raise ValueError("principal character has no zeros in scope")
    if T <= 0:
        return {c: np.empty(0) for c in labels}
    data = {c: LData.of(group[c]) for c in labels}
    by_k: dict[int, list[int]] = {}
    for c in labels:
        by_k.setdefault(data[c].modulus, []).append(c)
    result = {}
    for k, cs in by_k.items():
        step = _grid_step(T, k)
        pending = list(cs)
        for attempt in range(MAX_REFINE + 1):
            uniq = list({data[c].conrey: data[c] for c in pending}.values())
            found = dict(zip([d.conrey for d in uniq], _grid_ready(uniq, T, step)))
            bad = []
            for c in pending:
                zs = found[data[c].conrey]
                cc = _conj_label(q, c)
                zc = found.get(data[cc].conrey)
                if zc is None:
                    zc = _grid_ready([data[cc]], T, step)[0]
                ok, err = count_check(len(zs) + len(zc), T, k)
                if ok:
                    result[c] = zs
                else:
                    bad.append((c, err, zs, zc))
            if not bad:
                break
            pending = [b[0] for b in bad]
            step /= 2
        else:
            c, err, zs, zc = bad[0]
            raise CompletenessError(
                f"q={q} conrey={c}: count off by {err:.2f} at T={T}; {_suspect(zs, zc, T, k)}"
            )
    return result


def compute_zeros(q: int, conrey: int, T: float) -> np.ndarray:
    """Positive heights in (0, T] for chi_q(conrey, .) with a completeness check."""
    return compute_zeros_many(q, [conrey], T)[conrey]


def _suspect(zs, zc, T, k) -> str:
    both = np.sort(np.concatenate([zs, zc]))
    grid = np.arange(1.0, T + 1.0)
    err = np.array([np.searchsorted(both, u, "right") * 1.0 - count_main(u, k) for u in grid])
    i = int(np.argmax(np.abs(np.diff(err)))) if len(err) > 1 else 0
    return f"suspect interval [{grid[i]:.1f}, {grid[min(i + 1, len(grid) - 1)]:.1f}]"


# ---------------------------------------------------------------------------
# store


@dataclass
class ZeroList:
    heights: np.ndarray
    provenance: str
    T: float  # height the list claims to cover
    T_cert: float = 0.0
    sha256: str = ""


@dataclass
class ZeroStore:
    lists: dict[tuple[int, int], ZeroList] = field(default_factory=dict)

    def __contains__(self, key) -> bool:
        return key in self.lists

    def heights(self, q: int, conrey: int) -> np.ndarray:
        return self.lists[(q, conrey)].heights

    def add(self, q: int, conrey: int, heights, provenance: str, T: float) -> None:
        h = np.asarray(heights, dtype=float)
        if np.any(h <= 0) or np.any(np.diff(h) <= 0):
            raise ZeroFormatError(f"heights for ({q},{conrey}) must be positive and strictly increasing")
        self.lists[(q, conrey)] = ZeroList(h, provenance, T)
        self._certify(q, conrey)
        cc = _conj_label(q, conrey)
        if cc != conrey and (q, cc) in self.lists:
            self._certify(q, cc)

    def _certify(self, q: int, conrey: int) -> None:
        zl = self.lists[(q, conrey)]
        cc = _conj_label(q, conrey)
        other = self.lists.get((q, cc))
        if other is None:
            zl.T_cert = 0.0
            return
        qchi = character_group(q)[conrey].conductor
        both = np.sort(np.concatenate([zl.heights, other.heights])) if cc != conrey else np.repeat(zl.heights, 2)
        top = min(zl.T, other.T)
        cands = [u for u in np.concatenate([both, [top]]) if u <= top]
        cert = 0.0
        for u in sorted(set(cands)):
            n = int(np.searchsorted(both, u, "right"))
            if count_check(n, u, qchi)[0]:
                cert = float(u)
        zl.T_cert = cert
        if cert < top:
            warnings.warn(f"zeros for ({q},{conrey}) certified only to {cert:.3f} < {top:.3f}")

    def t_cert(self, q: int, conrey: int) -> float:
        zl = self.lists.get((q, conrey))
        return 0.0 if zl is None else zl.T_cert

    def signed(self, q: int, conrey: int, T: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Signed heights of chi with |gamma| <= T.

        Returns (gamma, owner, index): a zero at +gamma is index ``index`` of
        chi's own list; a zero at -gamma is index ``index`` of the conjugate's
        list.  (owner, index) names the conjugate orbit the zero belongs to.
        """
        self.require(q, conrey, T)
        cc = _conj_label(q, conrey)
        pos = self.heights(q, conrey)
        neg = self.heights(q, cc)
        pi = np.flatnonzero(pos <= T)
        ni = np.flatnonzero(neg <= T)
        gam = np.concatenate([pos[pi], -neg[ni]])
        owner = np.concatenate([np.full(len(pi), conrey), np.full(len(ni), cc)])
        return gam, owner, np.concatenate([pi, ni])

    def require(self, q: int, conrey: int, T: float) -> None:
        cc = _conj_label(q, conrey)
        if min(self.t_cert(q, conrey), self.t_cert(q, cc)) + 1e-12 < T:
            raise InsufficientZeros(f"zeros for ({q},{conrey}) not certified to T={T}")

    def ensure(self, q: int, T: float, conreys=None) -> "ZeroStore":
        """Compute (or reuse) certified zeros to height T for characters mod q."""
        group = character_group(q)
        labels = conreys if conreys is not None else [c.conrey for c in group.nonprincipal()]
        todo = set()
        for c in labels:
            todo.add(c)
            todo.add(_conj_label(q, c))
        need = [c for c in sorted(todo) if not ((q, c) in self.lists and self.lists[(q, c)].T_cert >= T)]
        if need:
            for c, zs in compute_zeros_many(q, need, T).items():
                self.lists[(q, c)] = ZeroList(zs, "computed", T)
        for c in sorted(todo):
            self._certify(q, c)
        return self

    def rows(self):
        for (q, c), zl in sorted(self.lists.items()):
            for g in zl.heights:
                yield q, c, float(g)


def _conj_label(q: int, conrey: int) -> int:
    return pow(conrey, -1, q)


TSV_HEADER = "q\tconrey\tgamma"


def _sig_digits(s: str) -> int:
    digits = s.replace("-", "").replace(".", "").lstrip("0")
    return len(digits)


def load_zeros(path, store: ZeroStore | None = None) -> ZeroStore:
    """Read a zeros TSV; heights are trusted up to the certified height only."""
    store = ZeroStore() if store is None else store
    path = Path(path)
    data = path.read_bytes()
    text = data.decode("utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        return store
    if lines[0].strip() != TSV_HEADER:
        raise ZeroFormatError(f"{path}:1: header must be {TSV_HEADER!r}")
    groups: dict[tuple[int, int], list[float]] = {}
    last = None
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ZeroFormatError(f"{path}:{i}: expected 3 tab-separated fields")
        try:
            q, c, g = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ZeroFormatError(f"{path}:{i}: {exc}") from exc
        if g <= 0:
            raise ZeroFormatError(f"{path}:{i}: heights must be positive")
        if _sig_digits(parts[2].strip()) < 12:
            raise ZeroFormatError(f"{path}:{i}: gamma needs at least 12 significant digits")
        key = (q, c, g)
        if last is not None and key <= last:
            raise ZeroFormatError(f"{path}:{i}: rows not strictly ascending")
        last = key
        groups.setdefault((q, c), []).append(g)
    sha = hashlib.sha256(data).hexdigest()
    for (q, c), hs in groups.items():
        store.lists[(q, c)] = ZeroList(np.array(hs), "ingested", hs[-1], sha256=sha)
    for (q, c) in groups:
        store._certify(q, c)
    return store


def format_rows(rows) -> str:
    out = [TSV_HEADER]
    for q, c, g in rows:
        out.append(f"{q}\t{c}\t{g:.13f}")
    return "\n".join(out) + "\n"


def cache_root(cache_dir=None) -> Path:
    if cache_dir is None:
        cache_dir = os.environ.get("MOMLAB_CACHE", "cache")
    return Path(cache_dir)


def cached_store(q: int, T: float, cache_dir=None, conreys=None) -> ZeroStore:
    """Zeros to height T for characters mod q, read from or written to the cache."""
    root = cache_root(cache_dir) / "zeros" / f"q={q}"
    group = character_group(q)
    labels = conreys if conreys is not None else [c.conrey for c in group.nonprincipal()]
    want = sorted({c for x in labels for c in (x, _conj_label(q, x))})
    store = ZeroStore()
    missing = []
    for c in want:
        f = root / f"chi={c}.tsv"
        meta = root / f"chi={c}.json"
        if f.exists() and meta.exists():
            info = json.loads(meta.read_text())
            data = f.read_bytes()
            if info.get("T", 0) >= T and info.get("sha256") == hashlib.sha256(data).hexdigest():
                tmp = load_zeros(f)
                hs = tmp.lists[(q, c)].heights if (q, c) in tmp.lists else np.empty(0)
                store.lists[(q, c)] = ZeroList(hs[hs <= T], "cached", T, sha256=info["sha256"])
                continue
        missing.append(c)
    if missing:
        store.ensure(q, T, missing)
        root.mkdir(parents=True, exist_ok=True)
        for c in missing:
            zl = store.lists[(q, c)]
            text = format_rows((q, c, g) for g in zl.heights)
            (root / f"chi={c}.tsv").write_text(text, encoding="utf-8")
            sha = hashlib.sha256(text.encode()).hexdigest()
            zl.sha256 = sha
            (root / f"chi={c}.json").write_text(json.dumps({"T": T, "sha256": sha, "em_terms": EM_TERMS, "bisect_tol": BISECT_TOL}))
    for c in want:
        store._certify(q, c)
    return store


# ---------------------------------------------------------------------------
# sums over zeros


def log_quad(g, lo: float, hi: float = math.inf, limit: int = 200) -> float:
    """int_lo^hi g(u) du in the variable v = log u, split into unit pieces.

    Tails of the form u^{-c} spread their mass over many decades; quadrature
    in u misses most of it.
    """
    if hi <= lo:
        return 0.0
    a = math.log(lo)
    b = math.log(hi) if math.isfinite(hi) else a + 400.0
    edges = np.unique(np.concatenate([np.arange(a, b, 2.0), [b]]))
    tot = []
    for x, y in zip(edges[:-1], edges[1:]):
        tot.append(integrate.quad(lambda v: g(math.exp(v)) * math.exp(v), x, y, limit=limit)[0])
        acc = abs(math.fsum(tot))
        if len(tot) > 3 and acc > 0 and abs(tot[-1]) < 1e-18 * acc:
            break
    return math.fsum(tot)


def zero_tail_bound(g, T: float, qchi: int, upper: float = math.inf) -> float:
    """Bound for sum_{|gamma| > T} g(|gamma|) with g non-negative and non-increasing.

    Stieltjes integration against N(u) = main(u) + R(u), |R(u)| <= tolerance(u).
    """
    if T <= 0:
        raise ValueError("T must be positive")

    def dens(u):
        return abs(math.log(qchi * u / (2 * math.pi))) / math.pi

    def gp(u, h=1e-6):
        return abs(g(u * (1 + h)) - g(u * (1 - h))) / (2 * u * h)

    main = log_quad(lambda u: g(u) * dens(u), T, upper)
    edge = count_tolerance(T, qchi) * g(T)
    var = log_quad(lambda u: count_tolerance(u, qchi) * gp(u), T, upper)
    return main + edge + var


def _h_envelope(h: SpectralWeight):
    """Non-increasing majorant of u -> h(u / 2 pi) on u >= 0."""
    grid = np.concatenate([np.linspace(0, 50, 2001), np.geomspace(50.01, 1e6, 2000)])
    vals = h.h(grid / (2 * math.pi))
    env = np.maximum.accumulate(vals[::-1])[::-1]

    def g(u):
        if u >= grid[-1]:
            return float(env[-1] * (grid[-1] / u) ** 2)
        return float(np.interp(u, grid, env))

    return g


def b_chi(store: ZeroStore, q: int, conrey: int, h: SpectralWeight, T: float) -> tuple[float, float]:
    """sum over zeros of chi with |gamma| <= T of h(gamma / 2 pi), with tail bound."""
    store.require(q, conrey, T)
    if h.is_zero:
        return 0.0, 0.0
    gam, _, _ = store.signed(q, conrey, T)
    val = math.fsum(h.h(gam / (2 * math.pi)))
    qchi = character_group(q)[conrey].conductor
    return val, zero_tail_bound(_h_envelope(h), T, qchi)


@dataclass(frozen=True)
class BDecomposition:
    b1: float
    b2: float
    b3: float
    b2_tail: float
    b3_err: float

    @property
    def total(self) -> float:
        return self.b1 + self.b2 + self.b3

    @property
    def bound(self) -> float:
        return self.b2_tail + self.b3_err


def grh_envelope(u, q: int):
    """Working bound for |sum_{n <= u} Lambda(n) chi(n)|, chi non-principal."""
    u = np.asarray(u, dtype=float)
    return np.sqrt(u) * np.log(q * u) ** 2 / math.pi


def prime_tail_bound(f, df, N: float, partial: float, q: int, upper: float = math.inf) -> float:
    """Bound for |sum_{n > N} Lambda(n) chi(n) f(n)| by partial summation.

    ``partial`` is |sum_{n <= N} Lambda(n) chi(n)|; beyond N the GRH-type
    envelope is used.
    """
    if not math.isfinite(upper) or upper > N:
        tail = log_quad(lambda u: float(grh_envelope(u, q)) * abs(df(u)), N, upper)
    else:
        tail = 0.0
    return abs(partial) * abs(f(N)) + tail


def b1_value(chi: Character, h: SpectralWeight) -> float:
    a0 = h.alpha()
    return a0 * (math.log(chi.conductor / (8 * math.pi)) - EULER_GAMMA - math.pi / 2 * (1 if chi.parity == 0 else -1))


def b1_digamma(chi: Character, h: SpectralWeight) -> float:
    return (math.log(chi.conductor / math.pi) + digamma(0.25 + 0.5 * chi.parity)) * h.alpha()


def b_decomposition(q: int, conrey: int, h: SpectralWeight, table: arith.LambdaTable) -> BDecomposition:
    chi = character_group(q)[conrey]
    if chi.is_principal:
        raise ValueError("non-principal character required")
    if h.is_zero:
        return BDecomposition(0.0, 0.0, 0.0, 0.0, 0.0)
    prim = chi.primitive() if not chi.is_primitive else chi
    b1 = b1_value(chi, h)
    n = table.n
    ln = np.log(n.astype(float))
    k = prim.logs[n % prim.modulus]
    vals = np.where(k >= 0, np.exp(2j * np.pi * k / prim.exponent), 0)
    w = table.lam * n.astype(float) ** -0.5 * np.real(h.hhat(ln))
    s = np.sum(vals * w)
    b2 = -2 * s.real
    partial = abs(np.sum(vals * table.lam))

    def f(u):
        return u**-0.5 * float(np.atleast_1d(h.hhat(math.log(u)))[0])

    def df(u, eps=1e-6):
        return (f(u * (1 + eps)) - f(u * (1 - eps))) / (2 * u * eps)

    upper = math.exp(h.weight.support * 2) if math.isfinite(h.weight.support) else math.inf
    tail = 2 * prime_tail_bound(f, df, float(table.limit), partial, prim.modulus, upper)
    b3, e3 = h.archimedean_integral(0.5 + chi.parity, 2.0)
    return BDecomposition(b1, b2, b3, tail, e3)


def b_band(h: SpectralWeight, table: arith.LambdaTable) -> float:
    """Explicit constant C with |b(chi; h) - alpha log q_chi| <= C for every chi."""
    a0 = abs(h.alpha())
    arch = a0 * (math.log(8 * math.pi) + EULER_GAMMA + math.pi / 2)
    n = table.n.astype(float)
    pr = 2 * np.sum(table.lam * n**-0.5 * np.abs(h.hhat(np.log(n))))
    # absolute tail with psi(u) <= 1.04 u
    def f(u):
        return u**-0.5 * abs(float(np.atleast_1d(h.hhat(math.log(u)))[0]))

    def df(u, eps=1e-6):
        return abs(f(u * (1 + eps)) - f(u * (1 - eps))) / (2 * u * eps)

    upper = math.exp(h.weight.support * 2) if math.isfinite(h.weight.support) else math.inf
    if upper > table.limit:
        pr += 2 * 1.04 * log_quad(lambda u: u * df(u), table.limit, upper)
    j0 = max(abs(h.archimedean_integral(0.5, 2.0)[0]), abs(h.archimedean_integral(1.5, 2.0)[0]))
    return arch + float(pr) + j0


def pair_correlation(
    store: ZeroStore, q: int, conrey: int, z: float, L: float, h: SpectralWeight, kern: Kernel, T: float
) -> tuple[float, float]:
    """Pair-correlation sum over chi1 chi2 = chi (both non-principal), with tail bound."""
    if L < 1:
        raise ValueError("L must be at least 1")
    group = character_group(q)
    chi = group[conrey]
    if h.is_zero:
        return 0.0, 0.0
    total = []
    bound = 0.0
    for c1 in group.nonprincipal():
        c2 = group.mul(chi, group.conj(c1))
        if c2.is_principal:
            continue
        g1, _, _ = store.signed(q, c1.conrey, T)
        g2, _, _ = store.signed(q, c2.conrey, T)
        w1 = h.h(g1 / (2 * math.pi))
        w2 = h.h(g2 / (2 * math.pi))
        arg = L / (2 * math.pi) * (z - g1[:, None] - g2[None, :])
        total.append(float(np.sum(w1[:, None] * w2[None, :] * kern.phi_hat(arg))))
        s1, t1 = b_chi(store, q, c1.conrey, h, T)
        s2, t2 = b_chi(store, q, c2.conrey, h, T)
        phimax = float(kern.phi_hat(0.0))
        bound += phimax * (s1 * t2 + t1 * s2 + t1 * t2)
    return math.fsum(total), bound
