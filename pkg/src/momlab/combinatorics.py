"""Gaussian moments, the pairing constants nu, nu', nu'' and involution classes.

An involution of the s x n grid is stored through its row-incidence
matrix C, where C[mu][nu] counts the points of row mu sent into row nu.
All class tests only look at C.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

MAX_POINTS = 16
TAGS = ("F", "G", "I", "F_literal")


class CombinatoricsError(ValueError):
    pass


class EnumerationBudget(RuntimeError):
    pass


def double_factorial_odd(m: int) -> int:
    """(m-1)!! for even m: the number of fixed-point-free involutions on m points."""
    out = 1
    for k in range(m - 1, 0, -2):
        out *= k
    return out


def mu(n: int) -> int:
    if n < 0:
        raise CombinatoricsError("n must be non-negative")
    if n % 2:
        return 0
    m = n // 2
    return math.factorial(n) // (2**m * math.factorial(m))


def nu(n: int) -> Fraction:
    if n < 2:
        raise CombinatoricsError("nu needs n >= 2")
    tot = Fraction(0)
    for m in range(0, (n - 2) // 2 + 1):
        k = n - 2 * m
        tot += Fraction(1, math.factorial(k) * 4**m * math.factorial(m) ** 2)
    return math.factorial(n) ** 2 * tot


def _check_even(n: int) -> None:
    if n < 2 or n % 2:
        raise CombinatoricsError("defined for even n >= 2")


def nu_prime(n: int) -> Fraction:
    _check_even(n)
    f3 = math.factorial(n) ** 3
    tot = Fraction(0)
    for k1 in range(2, n + 1):
        for k2 in range(2, n + 1):
            l1, l2, l3 = n - k1, n - k2, n - k1 - k2
            if min(l1, l2, l3) < 0 or l1 % 2 or l2 % 2 or l3 % 2:
                continue
            l1, l2, l3 = l1 // 2, l2 // 2, l3 // 2
            den = math.factorial(k1) * math.factorial(k2) * 2 ** (l1 + l2 + l3)
            den *= math.factorial(l1) * math.factorial(l2) * math.factorial(l3)
            tot += Fraction(f3, den)
    return tot


def nu_dprime(n: int) -> Fraction:
    _check_even(n)
    f3 = math.factorial(n) ** 3
    tot = Fraction(0)
    for k1, k2, k3 in product(range(1, n + 1), repeat=3):
        # the index opposite to the pair (i, j) carries the l
        ls = (n - k2 - k3, n - k1 - k3, n - k1 - k2)
        if min(ls) < 0 or any(v % 2 for v in ls):
            continue
        l1, l2, l3 = (v // 2 for v in ls)
        den = math.factorial(k1) * math.factorial(k2) * math.factorial(k3) * 2 ** (l1 + l2 + l3)
        den *= math.factorial(l1) * math.factorial(l2) * math.factorial(l3)
        tot += Fraction(f3, den)
    return tot / 3


def theta_exact(n: int) -> tuple[Fraction, Fraction]:
    """(c, v) with theta = c / sqrt(v); c = 0 for odd n."""
    if n < 2:
        raise CombinatoricsError("theta needs n >= 2")
    if n % 2:
        return Fraction(0), Fraction(1)
    v = nu(n)
    return (nu_prime(n) + nu_dprime(n)) / v, v


def theta(n: int, r: int = 1) -> float:
    """Odd-moment constant; independent of r."""
    if r < 1:
        raise CombinatoricsError("r must be positive")
    c, v = theta_exact(n)
    return float(c) / math.sqrt(v)


def even_formula(r: int, n: int) -> Fraction:
    return mu(2 * r) * nu(n) ** r


def odd_formula(r: int, n: int) -> Fraction:
    _check_even(n)
    if r < 1:
        raise CombinatoricsError("r must be positive")
    lead = Fraction(math.factorial(2 * r + 1), 2**r * math.factorial(r - 1))
    return lead * nu(n) ** (r - 1) * (nu_prime(n) + nu_dprime(n))


# ---------------------------------------------------------------------------
# enumeration


def _edges(C, s):
    return [(a, b) for a in range(s) for b in range(a + 1, s) if C[a][b]]


def _off(C, s, a):
    return sum(C[a][b] for b in range(s) if b != a)


def in_I(C, s) -> bool:
    return all(C[a][a] % 2 == 0 and _off(C, s, a) >= 2 for a in range(s))


def _has_triangle(E) -> bool:
    es = set(E)
    verts = sorted({v for e in E for v in e})
    return any((a, b) in es and (b, c) in es and (a, c) in es for a, b, c in combinations(verts, 3))


def in_F(C, s) -> bool:
    if not in_I(C, s):
        return False
    E = _edges(C, s)
    if s % 2 == 0:
        # every row has exactly one partner row
        return all(sum(1 for b in range(s) if b != a and C[a][b]) == 1 for a in range(s))
    return _odd_block(C, s, E, literal=False)


def in_F_literal(C, s) -> bool:
    """Odd-s reading where rows outside N may pair with rows inside N."""
    if s % 2 == 0:
        return in_F(C, s)
    if not all(_off(C, s, a) >= 2 for a in range(s)):
        return False
    return _odd_block(C, s, _edges(C, s), literal=True)


def _odd_block(C, s, E, literal: bool) -> bool:
    deg = [0] * s
    for a, b in E:
        deg[a] += 1
        deg[b] += 1
    for N in combinations(range(s), 3):
        inner = sum(1 for a, b in combinations(N, 2) if C[a][b])
        if inner not in (2, 3):
            continue
        S = [a for a in range(s) if a not in N]
        if any(deg[a] != 1 for a in S):
            continue
        if not literal:
            # rows of N only meet rows of N
            if any(C[a][b] for a in N for b in S):
                continue
        return True
    return False


def in_G(C, s) -> bool:
    if not in_I(C, s):
        return False
    E = _edges(C, s)
    r = s // 2
    if s % 2 == 0:
        return len(E) >= r + 1
    return len(E) >= r + 3 or (len(E) == r + 2 and not _has_triangle(E))


_TESTS = {"F": in_F, "G": in_G, "I": in_I, "F_literal": in_F_literal}


@dataclass
class InvolutionClassCount:
    s: int
    n: int
    tag: str
    count: int
    scanned: int
    profiles: Counter = field(default_factory=Counter)  # diagonal sizes |J_mu,mu| -> count
    witness: tuple | None = None

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "n": self.n,
            "class": self.tag,
            "count": self.count,
            "scanned": self.scanned,
            "profiles": {",".join(map(str, k)): v for k, v in sorted(self.profiles.items())},
        }


def iter_involutions(m: int):
    """Fixed-point-free involutions of range(m) as partner lists (each exactly once)."""
    partner = [-1] * m

    def rec():
        try:
            a = partner.index(-1)
        except ValueError:
            yield partner
            return
        for b in range(a + 1, m):
            if partner[b] == -1:
                partner[a], partner[b] = b, a
                yield from rec()
                partner[a] = partner[b] = -1

    if m % 2 == 0:
        yield from rec()


def enumerate_all(s: int, n: int, relabel=None, max_points: int = MAX_POINTS) -> dict[str, InvolutionClassCount]:
    """Scan every fixed-point-free involution of the s x n grid once and count each class.

    ``relabel`` is an optional permutation of the points; point p is then
    placed in row relabel[p] // n.
    """
    m = s * n
    if s < 1 or n < 1:
        raise CombinatoricsError("s and n must be positive")
    if m > max_points:
        raise EnumerationBudget(f"{m} points exceeds the budget of {max_points}")
    row = [(relabel[p] if relabel is not None else p) // n for p in range(m)]
    out = {t: InvolutionClassCount(s, n, t, 0, 0) for t in TAGS}
    if m % 2:
        return out
    C = [[0] * s for _ in range(s)]
    partner = [-1] * m
    scanned = 0

    def leaf():
        for t, fn in _TESTS.items():
            if fn(C, s):
                rec_ = out[t]
                rec_.count += 1
                rec_.profiles[tuple(C[a][a] for a in range(s))] += 1
                if rec_.witness is None:
                    rec_.witness = tuple(partner)

    def rec(start):
        nonlocal scanned
        a = start
        while a < m and partner[a] != -1:
            a += 1
        if a == m:
            scanned += 1
            leaf()
            return
        ra = row[a]
        for b in range(a + 1, m):
            if partner[b] == -1:
                rb = row[b]
                partner[a], partner[b] = b, a
                C[ra][rb] += 1
                C[rb][ra] += 1
                rec(a + 1)
                C[ra][rb] -= 1
                C[rb][ra] -= 1
                partner[a] = partner[b] = -1

    rec(0)
    for v in out.values():
        v.scanned = scanned
    return out


_CACHE: dict[tuple[int, int], dict[str, InvolutionClassCount]] = {}


def enumerate_class(s: int, n: int, tag: str, max_points: int = MAX_POINTS) -> InvolutionClassCount:
    if tag not in TAGS:
        raise CombinatoricsError(f"unknown class {tag!r}; known: {TAGS}")
    key = (s, n)
    if key not in _CACHE:
        _CACHE[key] = enumerate_all(s, n, max_points=max_points)
    return _CACHE[key][tag]


def formula_value(s: int, n: int) -> Fraction | None:
    """Closed form for |F_{s,n}| where one is available."""
    if s % 2 == 0:
        return even_formula(s // 2, n)
    if n % 2 == 0 and s >= 3:
        return odd_formula((s - 1) // 2, n)
    return None


@dataclass
class FormulaCheck:
    s: int
    n: int
    enumerated: int
    formula: Fraction
    match: bool
    witness: tuple | None = None


def verify_formulas(max_points: int = 12) -> list[FormulaCheck]:
    """Compare enumeration with the closed forms for every admissible (s, n) within budget."""
    out = []
    for s in range(2, max_points // 2 + 1):
        for n in range(2, max_points // s + 1):
            f = formula_value(s, n)
            if f is None:
                continue
            rec = enumerate_class(s, n, "F", max_points)
            out.append(FormulaCheck(s, n, rec.count, f, rec.count == f, rec.witness))
    return out
