"""Invariant suite behind ``momlab verify``; each check returns a pass flag and a measured value."""

from __future__ import annotations

import itertools
import time

import numpy as np

from . import combinatorics as comb
from . import moments as mo
from .arith import character_group, conductor_moments, prime_powers_upto, sieve_lambda, sq_tables, verify_orthogonality
from .weights import kernel, make_weight


def _check(name, fn):
    t0 = time.time()
    try:
        passed, value = fn()
        err = None
    except Exception as exc:  # reported, not raised
        passed, value, err = False, None, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(passed), "value": value, "error": err, "seconds": round(time.time() - t0, 3)}


def _orthogonality(qmax):
    def run():
        bad = [q for q in range(1, qmax + 1) if not verify_orthogonality(character_group(q), 1e-10)[0]]
        return not bad, len(bad)

    return run


def _sq(qmax, comp):
    def run():
        pts = prime_powers_upto(comp)
        worst = 0.0
        for q in range(3, qmax + 1):
            brute, closed = sq_tables(q, pts)
            worst = max(worst, float(np.max(np.abs(brute - closed))))
        return worst < 1e-9, worst

    return run


def _conductor(qmax):
    def run():
        worst = max(abs(conductor_moments(q)[0]) for q in range(3, qmax + 1))
        return worst < 1e-12, worst

    return run


def _formulas(points):
    def run():
        res = comb.verify_formulas(points)
        return all(r.match for r in res), len(res)

    return run


def _delta(smax):
    def run():
        kern = kernel("triangle")
        for s in range(1, smax + 1):
            for sig in itertools.product(range(-2, 3), repeat=s):
                ind = int(sum(sig) == 0 and all(v != 0 for v in sig))
                if mo.delta_s(list(sig)) != ind:
                    return False, list(sig)
                for T in (1.0, 10.0, 100.0):
                    if mo.delta_s_smoothed(list(sig), kern, T) < ind - 1e-12:
                        return False, list(sig)
        return True, smax

    return run


def _moment_sides(qs, ns, xs):
    def run():
        eta = make_weight("expK:1")
        table = sieve_lambda(10**6)
        worst = 0.0
        for q in qs:
            for n in ns:
                for x in xs:
                    r = mo.moment_residue_side(x, q, n, eta, table).value
                    c = mo.moment_character_side(x, q, n, eta, table).value
                    worst = max(worst, abs(r - c) / max(abs(r), 1e-300))
        return worst < 1e-9, worst

    return run


def _first_moment():
    def run():
        eta = make_weight("expK:1")
        table = sieve_lambda(10**5)
        worst = max(abs(mo.moment_residue_side(x, q, 1, eta, table).value) for q in (3, 5, 8, 12) for x in (10.0, 1e3, 1e4))
        return worst < 1e-12, worst

    return run


def run_checks(level: str = "quick") -> list[dict]:
    full = level == "full"
    checks = [
        ("orthogonality", _orthogonality(50 if full else 20)),
        ("sq_closed_vs_brute", _sq(50 if full else 12, 200 if full else 50)),
        ("conductor_mean", _conductor(200 if full else 60)),
        ("involution_formulas", _formulas(12 if full else 8)),
        ("delta_kernel", _delta(5 if full else 3)),
        ("residue_vs_character", _moment_sides((3, 5, 7, 8, 12) if full else (5,), (2, 3, 4), (1e3, 1e4, 1e5) if full else (1e3,))),
        ("first_moment_zero", _first_moment()),
    ]
    return [_check(name, fn) for name, fn in checks]
