"""Random-phase model H_n(q; eta) for the limiting distribution of M_n.

Every zero gets a unit phase Z.  In "li" mode there is one uniform angle
per conjugate orbit: the zero at +gamma of chi and the zero at -gamma of
conj(chi) carry conjugate phases.  In "uniform" mode all phases come from a
single draw X ~ U[0, 1] with Z = exp(2 pi i gamma X).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .arith import character_group
from .moments import main_terms
from .weights import Weight
from .zeros import ZeroStore, b_chi

BLOCK = 4096
MODES = ("li", "uniform")
IMAG_TOL = 1e-9


class ModelError(ValueError):
    pass


@dataclass
class _Spectrum:
    """Signed zeros of every non-principal character, flattened."""

    q: int
    phi: int
    labels: list
    gam: list  # per character: signed heights
    w: list  # per character: eta^(gamma / 2 pi)
    key: list  # per character: orbit index into the angle vector
    sign: list  # per character: +1 / -1
    n_keys: int
    V: np.ndarray  # conj chi(a): characters x units


def _spectrum(q: int, eta: Weight, store: ZeroStore, T: float) -> _Spectrum:
    g = character_group(q)
    nonp = g.nonprincipal()
    keymap: dict[tuple[int, int], int] = {}
    gams, ws, keys, signs = [], [], [], []
    for c in nonp:
        gam, own, idx = store.signed(q, c.conrey, T)
        k = np.array([keymap.setdefault((int(o), int(i)), len(keymap)) for o, i in zip(own, idx)], dtype=np.int64)
        gams.append(gam)
        ws.append(np.real(eta.eta_hat(gam / (2 * math.pi))))
        keys.append(k)
        signs.append(np.sign(gam))
    V = np.array([[np.conj(c(int(a))) for a in g.units] for c in nonp])
    return _Spectrum(q, g.phi, [c.conrey for c in nonp], gams, ws, keys, signs, len(keymap), V)


def _h_from_w(W: np.ndarray, sp: _Spectrum, n: int):
    """H_n from W (samples x characters); returns real values and the largest imaginary residue."""
    D = W @ sp.V / sp.phi  # samples x units
    H = np.mean(D**n, axis=1)
    resid = max(float(np.max(np.abs(D.imag), initial=0.0)), float(np.max(np.abs(H.imag), initial=0.0)))
    return H.real, resid


def _w_li(theta: np.ndarray, sp: _Spectrum) -> np.ndarray:
    W = np.empty((theta.shape[0], len(sp.labels)), dtype=complex)
    for j in range(len(sp.labels)):
        Z = np.exp(1j * theta[:, sp.key[j]] * sp.sign[j])
        W[:, j] = -(Z @ sp.w[j])
    return W


def _w_uniform(X: np.ndarray, sp: _Spectrum) -> np.ndarray:
    W = np.empty((len(X), len(sp.labels)), dtype=complex)
    for j in range(len(sp.labels)):
        W[:, j] = -(np.exp(2j * math.pi * np.outer(X, sp.gam[j])) @ sp.w[j])
    return W


def _w_time(t: np.ndarray, sp: _Spectrum) -> np.ndarray:
    W = np.empty((len(t), len(sp.labels)), dtype=complex)
    for j in range(len(sp.labels)):
        W[:, j] = -(np.exp(1j * np.outer(t, sp.gam[j])) @ sp.w[j])
    return W


@dataclass
class SampleBatch:
    q: int
    n: int
    mode: str
    seed: int
    count: int
    values: np.ndarray = field(repr=False)
    imag_residue: float
    T_zero: float
    eta: str

    @property
    def power_sums(self) -> list[float]:
        return [math.fsum(self.values**k) for k in range(1, 7)]

    def mean(self) -> float:
        return math.fsum(self.values) / self.count

    def stderr(self) -> float:
        return float(np.std(self.values, ddof=1)) / math.sqrt(self.count)


def sample_H(q: int, n: int, eta: Weight, store: ZeroStore, mode: str = "li", seed: int = 0, count: int = 10_000, T: float = 100.0) -> SampleBatch:
    """Draw ``count`` samples of H_n; block b uses a Philox stream keyed by (seed, b)."""
    if n < 2:
        raise ModelError("n must be at least 2")
    if mode not in MODES:
        raise ModelError(f"unknown mode {mode!r}; known: {MODES}")
    sp = _spectrum(q, eta, store, T)
    out = np.empty(count)
    resid = 0.0
    for b, start in enumerate(range(0, count, BLOCK)):
        m = min(BLOCK, count - start)
        rng = np.random.Generator(np.random.Philox(key=[seed, b]))
        if mode == "li":
            W = _w_li(rng.uniform(0.0, 2 * math.pi, size=(m, sp.n_keys)), sp)
        else:
            W = _w_uniform(rng.uniform(0.0, 1.0, size=m), sp)
        H, r = _h_from_w(W, sp, n)
        out[start : start + m] = H
        resid = max(resid, r)
    if resid > IMAG_TOL:
        raise ArithmeticError(f"imaginary residue {resid:.3g} in H_n samples")
    return SampleBatch(q, n, mode, seed, count, out, resid, T, eta.spec)


def tuple_sum(q: int, n: int, W: dict) -> complex:
    """phi^{-n} sum over non-principal tuples with principal product of prod W(chi_i)."""
    from .moments import _tuples

    phi = character_group(q).phi
    return complex(sum(np.prod([W[c] for c in tup]) for tup in _tuples(q, n))) / phi**n


def model_mean_exact(q: int, n: int, eta: Weight, store: ZeroStore, T: float = 100.0) -> tuple[float, float]:
    """E[H_2] = phi^{-2} sum_chi sum_gamma eta^(gamma/2pi)^2 over |gamma| <= T, and the tail bound."""
    if n != 2:
        raise ModelError("closed form only for n = 2")
    g = character_group(q)
    h = eta.spectral()
    vals, tails = [], []
    for c in g.nonprincipal():
        v, t = b_chi(store, q, c.conrey, h, T)
        vals.append(v)
        tails.append(t)
    return math.fsum(vals) / g.phi**2, math.fsum(tails) / g.phi**2


@dataclass
class MomentEstimate:
    s: int
    value: float
    stderr: float
    prediction: float | None


def estimate_moments(batch: SampleBatch, s_list=(1, 2, 3, 4), eta: Weight | None = None, n_boot: int = 200, seed: int = 0) -> list[MomentEstimate]:
    """Centered sample moments with bootstrap standard errors and main-term predictions."""
    x = batch.values
    if len(x) == 0:
        raise ModelError("empty batch")
    rng = np.random.Generator(np.random.Philox(key=[seed, 2**32]))
    boots = rng.integers(0, len(x), size=(n_boot, len(x))) if n_boot else None
    out = []
    for s in s_list:
        val = float(np.mean((x - x.mean()) ** s))
        se = math.nan
        if boots is not None and len(x) > 1:
            reps = [np.mean((x[i] - x[i].mean()) ** s) for i in boots]
            se = float(np.std(reps, ddof=1))
        pred = main_terms(batch.q, batch.n, s, eta).moment if eta is not None and s >= 2 else None
        out.append(MomentEstimate(s, val, se, pred))
    return out


@dataclass
class TimeSeries:
    t: np.ndarray
    values: np.ndarray
    average: float
    imag_residue: float


def time_average_mode(q: int, n: int, eta: Weight, store: ZeroStore, T_max: float, step: float = 0.01, T: float = 100.0, chunk: int = 8192) -> TimeSeries:
    """H_n along Z = exp(i gamma t) for t on a uniform grid of [0, T_max], and its trapezoid average."""
    sp = _spectrum(q, eta, store, T)
    m = max(2, int(math.ceil(T_max / step)) + 1)
    t = np.linspace(0.0, T_max, m)
    vals = np.empty(m)
    resid = 0.0
    for i in range(0, m, chunk):
        H, r = _h_from_w(_w_time(t[i : i + chunk], sp), sp, n)
        vals[i : i + chunk] = H
        resid = max(resid, r)
    avg = float(np.trapezoid(vals, t) / T_max) if hasattr(np, "trapezoid") else float(np.trapz(vals, t) / T_max)
    return TimeSeries(t, vals, avg, resid)


def model_variance_prediction(q: int, n: int, eta: Weight) -> float:
    """nu_n (alpha log q)^n / phi^{n+1}."""
    return main_terms(q, n, 2, eta).V_n

