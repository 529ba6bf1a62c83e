"""Test functions, their spectral squares, and kernels.

Fourier convention: f^(xi) = int f(t) exp(-2 pi i xi t) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .arith import factorize

EULER_GAMMA = float(np.euler_gamma)
DEFAULT_DELTA = 0.25
TAYLOR_CUTOFF = 1e-4


class WeightSpecError(ValueError):
    pass


class MembershipError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, msg: str, value: float, bound: float):
        super().__init__(f"{msg} (value={value}, bound={bound})")
        self.value = value
        self.bound = bound


_GL_X, _GL_W = np.polynomial.legendre.leggauss(240)


def _gl(a: float, b: float, f, pieces: int = 1) -> float:
    """Composite Gauss-Legendre on [a, b]."""
    edges = np.linspace(a, b, pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        x = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * float(np.dot(_GL_W, f(x)))
    return total


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class Weight:
    spec: str
    delta: float
    scale: float = 1.0
    admissible: bool = True
    even: bool = True

    def eta(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def eta_hat(self, xi):
        raise NotImplementedError

    @property
    def support(self) -> float:
        """Radius outside which eta vanishes (inf if it does not)."""
        return math.inf

    def scaled(self, c: float) -> "Weight":
        from dataclasses import replace

        return replace(self, scale=self.scale * c)

    def spectral(self) -> "SpectralWeight":
        if not self.admissible:
            raise MembershipError(f"{self.spec} is not admissible; no spectral square")
        return SpectralWeight(self)

    def certificate(self, grid: int = 10_000) -> dict:
        """Grid checks on the decay and positivity conditions."""
        t = np.linspace(0.0, 40.0, grid)
        xi = np.linspace(0.0, 50.0, grid)
        eh = np.real(self.eta_hat(xi))
        env = np.exp((0.5 + self.delta) * t)
        C = float(np.max(np.abs(self.eta(t)) * env))
        Cd = float(np.max(np.abs(self.deriv(t[1:])) * env[1:]))
        Cp = float(np.max(np.abs(eh) * (xi + 1) * np.log(xi + 2) ** (2 + self.delta)))
        return {
            "spec": self.spec,
            "delta": self.delta,
            "even": self.even,
            "admissible": self.admissible,
            "hat_nonnegative": bool(np.all(eh >= -1e-15)),
            "decay_constant": C,
            "deriv_decay_constant": Cd,
            "hat_envelope_constant": Cp,
        }


@dataclass(frozen=True)
class ExpWeight(Weight):
    """eta(t) = exp(-K|t|)."""

    K: float = 1.0

    def eta(self, t):
        return self.scale * np.exp(-self.K * np.abs(t))

    def deriv(self, t):
        return -self.scale * self.K * np.sign(t) * np.exp(-self.K * np.abs(t))

    def eta_hat(self, xi):
        K = self.K
        return self.scale * 2 * K / (K * K + (2 * np.pi * np.asarray(xi)) ** 2)

    def hhat(self, x):
        x = np.abs(x)
        return self.scale**2 * np.exp(-self.K * x) * (x + 1 / self.K)

    def hhat_dd0(self) -> float:
        return -self.scale**2 * self.K


@dataclass(frozen=True)
class GaussConvWeight(Weight):
    """Self-convolution of exp(-pi t^2)."""

    def eta(self, t):
        return self.scale * np.exp(-np.pi * np.asarray(t) ** 2 / 2) / math.sqrt(2)

    def deriv(self, t):
        t = np.asarray(t)
        return -self.scale * np.pi * t * np.exp(-np.pi * t**2 / 2) / math.sqrt(2)

    def eta_hat(self, xi):
        return self.scale * np.exp(-2 * np.pi * np.asarray(xi) ** 2)

    def hhat(self, x):
        return self.scale**2 * 0.5 * np.exp(-np.pi * np.asarray(x) ** 2 / 4)

    def hhat_dd0(self) -> float:
        return -self.scale**2 * np.pi / 4


def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@dataclass(frozen=True)
class BumpConvWeight(Weight):
    """Self-convolution of the compact bump exp(-1/(1-t^2)) on (-1, 1)."""

    @property
    def support(self) -> float:
        return 2.0

    def _bhat(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        u = 0.5 * _GL_X + 0.5
        w = 0.5 * _GL_W
        b = _bump(u)
        return 2 * np.cos(2 * np.pi * np.outer(xi, u)) @ (w * b)

    def eta(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        for i, s in enumerate(t):
            if abs(s) >= 2:
                continue
            lo, hi = max(-1.0, s - 1), min(1.0, s + 1)
            out[i] = _gl(lo, hi, lambda u: _bump(u) * _bump(s - u))
        return self.scale * out

    def deriv(self, t, h: float = 1e-5):
        t = np.asarray(t, dtype=float)
        return (self.eta(t + h) - self.eta(t - h)) / (2 * h)

    def eta_hat(self, xi):
        return self.scale * self._bhat(xi) ** 2

    @cached_property
    def _hhat_nodes(self):
        # b^ decays like exp(-c sqrt(xi)); b^4 is negligible beyond xi = 60
        edges = np.linspace(0.0, 60.0, 61)
        gx, gw = np.polynomial.legendre.leggauss(60)
        xs, ws = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (hi - lo) * gx + 0.5 * (hi + lo))
            ws.append(0.5 * (hi - lo) * gw)
        x, w = np.concatenate(xs), np.concatenate(ws)
        return x, w * self._bhat(x) ** 4

    def hhat(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes, w = self._hhat_nodes
        return self.scale**2 * 2 * np.cos(2 * np.pi * np.outer(x, nodes)) @ w

    def hhat_dd0(self) -> float:
        nodes, w = self._hhat_nodes
        return float(-self.scale**2 * 2 * (2 * np.pi) ** 2 * np.dot(nodes**2, w))


@dataclass(frozen=True)
class ClassicalWeight(Weight):
    """eta_0(t) = exp(t/2) 1_{t <= 0}: the unsmoothed count, normalised."""

    def eta(self, t):
        t = np.asarray(t, dtype=float)
        return self.scale * np.where(t <= 0, np.exp(np.minimum(t, 0) / 2), 0.0)

    def deriv(self, t):
        return 0.5 * self.eta(t)

    def eta_hat(self, xi):
        return self.scale / (0.5 - 2j * np.pi * np.asarray(xi))

    @property
    def support(self) -> float:
        return 0.0

    def certificate(self, grid: int = 10_000) -> dict:
        return {"spec": self.spec, "delta": self.delta, "even": False, "admissible": False}


_BUMPS = {"gauss": GaussConvWeight, "bump": BumpConvWeight}


def make_weight(spec: str, delta: float = DEFAULT_DELTA) -> Weight:
    """Parse ``expK:<K>``, ``selfconv:<bump>`` or ``classical``."""
    if delta <= 0:
        raise WeightSpecError("delta must be positive")
    kind, _, arg = spec.strip().partition(":")
    if kind == "expK":
        try:
            K = float(arg)
        except ValueError as exc:
            raise WeightSpecError(f"bad K in {spec!r}") from exc
        if not K >= 0.5 + delta:
            raise MembershipError(f"K={K} below 1/2+delta={0.5 + delta}")
        return ExpWeight(spec=spec, delta=delta, K=K)
    if kind == "selfconv":
        cls = _BUMPS.get(arg)
        if cls is None:
            raise WeightSpecError(f"unknown bump {arg!r}; known: {sorted(_BUMPS)}")
        return cls(spec=spec, delta=delta)
    if kind == "classical" and not arg:
        return ClassicalWeight(spec=spec, delta=delta, admissible=False, even=False)
    raise WeightSpecError(f"cannot parse weight {spec!r}")


# ---------------------------------------------------------------------------
# h = eta^2 and its constants


@dataclass(frozen=True)
class SpectralWeight:
    """h = (eta^)^2 with h^ = eta * eta."""

    weight: Weight
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def h(self, xi):
        return np.real(self.weight.eta_hat(xi)) ** 2

    def hhat(self, x):
        return self.weight.hhat(x)

    def hhat_dd0(self) -> float:
        return self.weight.hhat_dd0()

    @property
    def is_zero(self) -> bool:
        return self.weight.scale == 0

    def alpha(self) -> float:
        return float(np.atleast_1d(self.hhat(0.0))[0])

    def archimedean_integral(self, shift: float, rate: float, tol: float = 1e-10, limit: int = 200) -> tuple[float, float]:
        """int_0^inf exp(-shift x)/(1-exp(-rate x)) (2h^(0) - h^(x) - h^(-x)) dx.

        Returns (value, error bound).
        """
        key = (shift, rate, tol, limit)
        if key in self._cache:
            return self._cache[key]
        if self.is_zero:
            return 0.0, 0.0
        a0 = self.alpha()
        dd0 = self.hhat_dd0()

        def diff(x):
            return 2 * a0 - 2 * np.atleast_1d(self.hhat(x))[0]

        def f(x):
            den = -math.expm1(-rate * x)
            if x < TAYLOR_CUTOFF:
                return math.exp(-shift * x) * (-dd0 * x * x) / den
            return math.exp(-shift * x) * diff(x) / den

        # tail: |integrand| <= 4 a0 exp(-shift x) / (1 - exp(-rate x))
        X = max(8.0, math.log(4 * abs(a0) / (shift * tol) + 1) / shift + 1)
        tail = 4 * abs(a0) * math.exp(-shift * X) / (shift * (-math.expm1(-rate * X)))
        total, err = 0.0, tail
        pts = [0.0, TAYLOR_CUTOFF, 0.125, 1.0, 4.0]
        pts = [p for p in pts if p < X] + [X]
        for lo, hi in zip(pts[:-1], pts[1:]):
            v, e = integrate.quad(f, lo, hi, epsabs=tol / 8, epsrel=0, limit=limit)
            total += v
            err += e
        if err > tol * 10:
            raise QuadratureError("archimedean integral did not converge", total, err)
        self._cache[key] = (total, err)
        return total, err


def alpha(h: SpectralWeight) -> float:
    return h.alpha()


def ramified_sum(q: int) -> float:
    return math.fsum(math.log(p) / (p - 1) for p, _ in factorize(q))


def beta_q(h: SpectralWeight, q: int, tol: float = 1e-10, limit: int = 200) -> float:
    if q < 3:
        raise ValueError("q must be at least 3")
    a0 = h.alpha()
    J, _ = h.archimedean_integral(0.5, 1.0, tol=tol, limit=limit)
    return -a0 * (math.log(8 * math.pi) + EULER_GAMMA + ramified_sum(q)) + 0.5 * J


def digamma(x: float) -> float:
    return float(special.digamma(x))


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    name: str
    int_pos: float
    nonneg_transform: bool
    even: bool = True
    support: float = 1.0

    def phi(self, x):
        raise NotImplementedError

    def phi_hat(self, xi):
        raise NotImplementedError

    def tail_sup(self, x: float) -> float:
        """sup of |phi_hat(y)| over |y| >= x."""
        raise NotImplementedError


@dataclass(frozen=True)
class TriangleKernel(Kernel):
    def phi(self, x):
        return np.maximum(0.0, 1 - np.abs(x))

    def phi_hat(self, xi):
        return np.sinc(np.asarray(xi, dtype=float)) ** 2

    def tail_sup(self, x: float) -> float:
        return 1.0 if x <= 1 / math.pi else 1 / (math.pi * x) ** 2


@dataclass(frozen=True)
class IndicatorKernel(Kernel):
    def phi(self, x):
        return (np.abs(x) <= 1).astype(float)

    def phi_hat(self, xi):
        return 2 * np.sinc(2 * np.asarray(xi, dtype=float))

    def tail_sup(self, x: float) -> float:
        return 2.0 if x <= 1 / math.pi else 1 / (math.pi * x)


def kernel(spec: str) -> Kernel:
    if spec == "triangle":
        return TriangleKernel("triangle", 0.5, True)
    if spec == "indicator":
        return IndicatorKernel("indicator", 1.0, False)
    raise WeightSpecError(f"unknown kernel {spec!r}")
