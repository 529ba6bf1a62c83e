"""Integer and Dirichlet-character arithmetic.

Characters are labelled by Conrey index.  For odd p the generator mod p^e
is the least primitive root mod p that is also primitive mod p^2; for
2^e (e >= 3) the unit group is generated by -1 and 5.  Values are kept as
integer exponents k with chi(n) = exp(2 pi i k / E), E the exponent of
(Z/qZ)^*, and turned into complex numbers only on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

DEFAULT_SIEVE_BUDGET = 400_000_000


class CapacityError(RuntimeError):
    """Requested table exceeds the configured memory budget."""


class DomainError(ValueError):
    pass


# ---------------------------------------------------------------------------
# elementary helpers


def factorize(n: int) -> list[tuple[int, int]]:
    """Trial division; fine for the moduli used here."""
    if n < 1:
        raise DomainError(f"cannot factor {n}")
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
        p += 1 if p == 2 else 2
    if n > 1:
        out.append((n, 1))
    return out


def euler_phi(n: int) -> int:
    r = n
    for p, _ in factorize(n):
        r -= r // p
    return r


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return factorize(n) == [(n, 1)]


def prime_power_split(n: int) -> tuple[int, int]:
    """Return (p, e) with n = p^e, or raise DomainError."""
    f = factorize(n) if n > 1 else []
    if len(f) != 1:
        raise DomainError(f"{n} is not a prime power")
    return f[0]


def valuation(q: int, p: int) -> int:
    v = 0
    while q % p == 0:
        q //= p
        v += 1
    return v


def crt_pair(r1: int, m1: int, r2: int, m2: int) -> int:
    """x = r1 mod m1, x = r2 mod m2 for coprime m1, m2."""
    if m1 == 1:
        return r2 % m2
    if m2 == 1:
        return r1 % m1
    inv = pow(m1, -1, m2)
    return (r1 + m1 * ((r2 - r1) * inv % m2)) % (m1 * m2)


# ---------------------------------------------------------------------------
# von Mangoldt table


@dataclass(frozen=True)
class LambdaTable:
    """Sparse von Mangoldt table: prime powers up to ``limit`` with log p."""

    limit: int
    n: np.ndarray
    lam: np.ndarray

    def __getitem__(self, m: int) -> float:
        if m < 1 or m > self.limit:
            raise IndexError(m)
        i = np.searchsorted(self.n, m)
        if i < len(self.n) and self.n[i] == m:
            return float(self.lam[i])
        return 0.0

    def dense(self) -> np.ndarray:
        out = np.zeros(self.limit + 1)
        out[self.n] = self.lam
        return out

    def chebyshev(self) -> float:
        return math.fsum(self.lam)


def primes_upto(N: int) -> np.ndarray:
    sieve = np.ones(N + 1, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, int(N**0.5) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve)


def sieve_lambda(N: int, budget: int = DEFAULT_SIEVE_BUDGET) -> LambdaTable:
    if N < 2:
        raise DomainError("N must be at least 2")
    if N > budget:
        raise CapacityError(f"N={N} exceeds sieve budget {budget}")
    ps = primes_upto(N)
    ns, ls = [ps], [np.log(ps.astype(float))]
    for p in ps[ps <= math.isqrt(N)]:
        p = int(p)
        x = p * p
        pw = []
        while x <= N:
            pw.append(x)
            x *= p
        ns.append(np.array(pw, dtype=np.int64))
        ls.append(np.full(len(pw), math.log(p)))
    n = np.concatenate(ns)
    lam = np.concatenate(ls)
    order = np.argsort(n, kind="stable")
    return LambdaTable(N, n[order].astype(np.int64), lam[order])


# ---------------------------------------------------------------------------
# characters


def _least_conrey_root(p: int) -> int:
    phi = p - 1
    fac = [r for r, _ in factorize(phi)]
    g = 2
    while True:
        if all(pow(g, phi // r, p) != 1 for r in fac) and (p == 2 or pow(g, p - 1, p * p) != 1):
            return g
        g += 1


@dataclass(frozen=True)
class _Component:
    """Coordinates on (Z/p^e Z)^* for the Conrey pairing."""

    p: int
    e: int
    modulus: int
    # coordinates per residue mod p^e; -1 for non-units
    c1: np.ndarray
    c2: np.ndarray | None
    # denominators: pairing is c1(m)c1(n)/d1 + c2(m)c2(n)/d2
    d1: int
    d2: int


@lru_cache(maxsize=None)
def _component(p: int, e: int) -> _Component:
    Q = p**e
    c1 = -np.ones(Q, dtype=np.int64)
    if p == 2:
        if e == 1:
            c1[1] = 0
            return _Component(p, e, Q, c1, None, 1, 1)
        # n = eps * 5^a; c1 = (1 - eps)/2, c2 = a
        c2 = -np.ones(Q, dtype=np.int64)
        half = 2 ** max(e - 2, 0)
        x = 1
        for a in range(half):
            c1[x], c2[x] = 0, a
            c1[Q - x], c2[Q - x] = 1, a
            x = x * 5 % Q
        return _Component(p, e, Q, c1, c2, 2, half)
    g = _least_conrey_root(p)
    phi = Q - Q // p
    x = 1
    for k in range(phi):
        c1[x] = k
        x = x * g % Q
    return _Component(p, e, Q, c1, None, phi, 1)


def carmichael(q: int) -> int:
    lam = 1
    for p, e in factorize(q) if q > 1 else []:
        if p == 2:
            v = 1 if e == 1 else (2 if e == 2 else 2 ** (e - 2))
        else:
            v = p ** (e - 1) * (p - 1)
        lam = lam * v // math.gcd(lam, v)
    return lam


@dataclass(frozen=True, eq=False)
class Character:
    modulus: int
    conrey: int
    exponent: int
    logs: np.ndarray = field(repr=False)
    conductor: int
    primitive_conrey: int
    parity: int

    def __call__(self, m: int) -> complex:
        k = int(self.logs[m % self.modulus])
        if k < 0:
            return 0j
        return complex(np.exp(2j * np.pi * k / self.exponent))

    def log(self, m: int) -> int:
        return int(self.logs[m % self.modulus])

    @property
    def values(self) -> np.ndarray:
        v = np.exp(2j * np.pi * self.logs / self.exponent)
        v[self.logs < 0] = 0
        return v

    @property
    def is_principal(self) -> bool:
        return self.conrey % self.modulus == 1 % self.modulus

    @property
    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    @property
    def is_real(self) -> bool:
        return bool(np.all((2 * self.logs[self.logs >= 0]) % self.exponent == 0))

    @property
    def order(self) -> int:
        ks = self.logs[self.logs >= 0]
        g = self.exponent
        for k in ks:
            g = math.gcd(g, int(k))
        return self.exponent // g

    def primitive(self) -> "Character":
        return character_group(self.conductor)[self.primitive_conrey]

    def to_dict(self) -> dict:
        return {
            "modulus": self.modulus,
            "conrey": self.conrey,
            "conductor": self.conductor,
            "primitive_conrey": self.primitive_conrey,
            "parity": self.parity,
            "order": self.order,
            "real": self.is_real,
            "exponent": self.exponent,
            "logs": [int(k) for k in self.logs],
        }


class CharacterGroup:
    """All characters mod q, indexed by Conrey label."""

    def __init__(self, q: int):
        if q < 1:
            raise DomainError("modulus must be positive")
        self.q = q
        self.exponent = carmichael(q)
        self.factors = factorize(q) if q > 1 else []
        self.phi = euler_phi(q)
        comps = [_component(p, e) for p, e in self.factors]
        self._comps = comps
        residues = np.arange(q)
        units = np.array([math.gcd(int(n), q) == 1 for n in range(q)])
        self.units = np.flatnonzero(units)
        E = self.exponent
        chars = []
        for m in self.units:
            m = int(m)
            k = np.zeros(q, dtype=np.int64)
            for c in comps:
                r = residues % c.modulus
                k += (c.c1[m % c.modulus] * c.c1[r] % c.d1) * (E // c.d1)
                if c.c2 is not None:
                    k += (c.c2[m % c.modulus] * c.c2[r] % c.d2) * (E // c.d2)
            k %= E
            k[~units] = -1
            cond, prim = self._conductor(m) if q > 1 else (1, 1)
            par = 0 if k[q - 1 if q > 1 else 0] == 0 else 1
            chars.append(Character(q, m if q > 1 else 1, E, k, cond, prim, par))
        self.characters = chars
        self.index = {c.conrey: i for i, c in enumerate(chars)}

    def _conductor(self, m: int) -> tuple[int, int]:
        """Conductor and primitive Conrey label, one prime power at a time."""
        cond, label = 1, 0
        for c in self._comps:
            f, lab = _component_conductor(c.p, c.e, m % c.modulus)
            label = crt_pair(label, cond, lab, f)
            cond *= f
        return cond, (label % cond if cond > 1 else 1)

    def __len__(self) -> int:
        return len(self.characters)

    def __iter__(self):
        return iter(self.characters)

    def __getitem__(self, conrey: int) -> Character:
        return self.characters[self.index[conrey % self.q if self.q > 1 else 1]]

    @property
    def principal(self) -> Character:
        return self[1]

    def nonprincipal(self) -> list[Character]:
        return [c for c in self.characters if not c.is_principal]

    def conj(self, chi: Character) -> Character:
        return self[pow(chi.conrey, -1, self.q)] if self.q > 1 else chi

    def mul(self, a: Character, b: Character) -> Character:
        return self[a.conrey * b.conrey % self.q] if self.q > 1 else a

    def value_matrix(self) -> np.ndarray:
        return np.array([c.values for c in self.characters])

    def restrict(self, chi: Character, d: int) -> np.ndarray:
        """Exponent table mod d of the component of chi on a unitary divisor d."""
        if self.q % d or math.gcd(d, self.q // d) != 1:
            raise DomainError(f"{d} is not a unitary divisor of {self.q}")
        co = self.q // d
        out = -np.ones(d, dtype=np.int64)
        for r in range(d):
            if math.gcd(r, d) == 1:
                out[r] = chi.logs[crt_pair(r, d, 1, co)]
        return out


@lru_cache(maxsize=None)
def _component_conductor(p: int, e: int, m: int) -> tuple[int, int]:
    """Least p^f inducing chi_{p^e}(m, .), with the inducing label mod p^f."""
    full = character_group(p**e)
    chi = full[m]
    for f in range(e + 1):
        Q = p**f
        if f == 0:
            if np.all(chi.logs[chi.logs >= 0] == 0):
                return 1, 0
            continue
        if f < e:
            small = character_group(Q)
            for cand in small:
                ok = True
                Ef, Es = full.exponent, small.exponent
                for n in full.units:
                    if (chi.logs[n] * Es - cand.logs[n % Q] * Ef) % (Ef * Es):
                        ok = False
                        break
                if ok:
                    return Q, cand.conrey
        else:
            return Q, m % Q
    raise AssertionError("unreachable")


_GROUPS: dict[int, CharacterGroup] = {}


def character_group(q: int) -> CharacterGroup:
    g = _GROUPS.get(q)
    if g is None:
        if q > 1 and len(factorize(q)) == 1:
            # prime-power groups are built without recursing into conductor search
            g = _prime_power_group(q)
        else:
            g = CharacterGroup(q)
        _GROUPS[q] = g
    return g


def _prime_power_group(q: int) -> CharacterGroup:
    g = CharacterGroup.__new__(CharacterGroup)
    g.q = q
    g.exponent = carmichael(q)
    g.factors = factorize(q)
    g.phi = euler_phi(q)
    g._comps = [_component(*g.factors[0])]
    c = g._comps[0]
    E = g.exponent
    units = np.array([math.gcd(n, q) == 1 for n in range(q)])
    g.units = np.flatnonzero(units)
    r = np.arange(q) % c.modulus
    chars = []
    for m in g.units:
        m = int(m)
        k = (c.c1[m] * c.c1[r] % c.d1) * (E // c.d1)
        if c.c2 is not None:
            k = k + (c.c2[m] * c.c2[r] % c.d2) * (E // c.d2)
        k = k % E
        k[~units] = -1
        chars.append(Character(q, m, E, k, 0, 0, 0 if k[q - 1] == 0 else 1))
    g.characters = chars
    g.index = {ch.conrey: i for i, ch in enumerate(chars)}
    _GROUPS[q] = g
    p, e = g.factors[0]
    fixed = []
    for ch in chars:
        cond, lab = _component_conductor(p, e, ch.conrey)
        fixed.append(Character(q, ch.conrey, E, ch.logs, cond, lab if cond > 1 else 1, ch.parity))
    g.characters = fixed
    return g


def verify_orthogonality(group: CharacterGroup, tol: float = 1e-10) -> tuple[bool, tuple[int, int] | None]:
    """Row orthogonality of the value table; returns the first failing pair."""
    V = group.value_matrix()
    G = V @ V.conj().T
    target = group.phi * np.eye(len(group))
    bad = np.argwhere(np.abs(G - target) > tol)
    if len(bad):
        i, j = bad[0]
        return False, (group.characters[i].conrey, group.characters[j].conrey)
    return True, None


# ---------------------------------------------------------------------------
# second-moment character sums S_q(m, n)


def primitive_value(chi: Character, m: int) -> complex:
    """chi*(m) for the primitive character inducing chi (1 for principal)."""
    if chi.conductor == 1:
        return 1 + 0j
    return chi.primitive()(m)


def sq_brute(q: int, chi: Character, m: int, n: int) -> complex:
    group = character_group(q)
    terms = []
    for c1 in group:
        c2 = group.mul(chi, group.conj(c1))
        terms.append(primitive_value(c1, m) * primitive_value(c2, n))
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def _root(k: int, E: int) -> complex:
    return complex(np.exp(2j * np.pi * k / E)) if k >= 0 else 0j


def _restricted_value(group: CharacterGroup, chi: Character, d: int, x: int) -> complex:
    if d == 1:
        return 1 + 0j
    k = int(group.restrict(chi, d)[x % d])
    return _root(k, group.exponent)


def sq_closed(q: int, chi: Character, a: int, b: int) -> complex:
    """Closed form of S_q(a, b) for prime powers a = p1^e1, b = p2^e2."""
    if q < 3:
        raise DomainError("q must be at least 3")
    p1, e1 = prime_power_split(a)
    p2, e2 = prime_power_split(b)
    group = character_group(q)
    v1, v2 = valuation(q, p1), valuation(q, p2)
    d1, d2 = p1**v1, p2**v2
    if v1 == 0 and v2 == 0:
        return chi(a) * group.phi * ((a - b) % q == 0)
    if v1 > 0 and v2 == 0:
        m = q // d1
        return chi(b) * euler_phi(m) * ((a - b) % m == 0)
    if v1 == 0 and v2 > 0:
        m = q // d2
        return chi(a) * euler_phi(m) * ((a - b) % m == 0)
    if p1 == p2:
        m = q // d1
        if m % chi.conductor:
            return 0j
        return chi(a + m) * euler_phi(m) * ((a - b) % m == 0)
    rest = q // (d1 * d2)
    val = (
        _restricted_value(group, chi, d1, b + q // d2)
        * _restricted_value(group, chi, d2, a)
        * _restricted_value(group, chi, rest, b)
    )
    return val * euler_phi(rest) * ((a - b) % rest == 0)


def prime_powers_upto(limit: int) -> list[int]:
    out = []
    for p in primes_upto(limit):
        x = int(p)
        while x <= limit:
            out.append(x)
            x *= int(p)
    return sorted(out)


def sq_tables(q: int, points: list[int]) -> tuple[np.ndarray, np.ndarray]:
    """Brute and closed S_q over all characters and all pairs of ``points``.

    Returns arrays of shape (phi(q), len(points), len(points)).  The brute
    side is a matrix product over the primitive value table; the closed side
    evaluates the case split for every entry.
    """
    group = character_group(q)
    P = np.array([[primitive_value(c, m) for m in points] for c in group])
    brute = np.empty((len(group), len(points), len(points)), dtype=complex)
    for i, chi in enumerate(group):
        perm = [group.index[group.mul(chi, group.conj(c1)).conrey] for c1 in group]
        brute[i] = P.T @ P[perm]
    closed = np.empty_like(brute)
    for i, chi in enumerate(group):
        for j, a in enumerate(points):
            for k, b in enumerate(points):
                closed[i, j, k] = sq_closed(q, chi, a, b)
    return brute, closed


def conductor_moments(q: int) -> tuple[float, float, float]:
    """(mean identity residual, variance, sum (log p)^2/p) over chi != chi_0."""
    if q < 3:
        raise DomainError("q must be at least 3")
    group = character_group(q)
    ramified = math.fsum(math.log(p) / (p - 1) for p, _ in group.factors)
    logs = [math.log(c.conductor) for c in group.nonprincipal()]
    mean = math.fsum(logs) / group.phi
    resid = mean - (math.log(q) - ramified)
    centre = math.log(q) - ramified
    var = math.fsum((x - centre) ** 2 for x in logs) / group.phi
    ref = math.fsum(math.log(p) ** 2 / p for p, _ in group.factors)
    return resid, var, ref
