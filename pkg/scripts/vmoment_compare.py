"""Moments of moments over log-time: zero-sum side against direct quadrature.

    python scripts/vmoment_compare.py --q 3 5 --T 50 --pairs 1,2 2,2
"""

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field

from momlab import moments as mo
from momlab.arith import sieve_lambda
from momlab.weights import kernel, make_weight
from momlab.zeros import cache_root, cached_store


@dataclass
class Config:
    moduli: list = field(default_factory=lambda: [3, 5])
    pairs: list = field(default_factory=lambda: [(1, 2), (2, 2)])
    T: float = 50.0
    T_zero: float = 100.0
    step: float = 0.01
    eta: str = "expK:1"
    phi: str = "triangle"
    table: int = 2 * 10**6
    cache_dir: str | None = None


def run(cfg: Config, out) -> None:
    eta = make_weight(cfg.eta)
    kern = kernel(cfg.phi)
    table = sieve_lambda(cfg.table)
    w = csv.writer(out)
    w.writerow(["q", "s", "n", "T", "spectral", "spectral_budget", "empirical", "empirical_budget", "difference", "agree", "main_term", "seconds"])
    for q in cfg.moduli:
        store = cached_store(q, cfg.T_zero, cache_root(cfg.cache_dir))
        for s, n in cfg.pairs:
            t0 = time.time()
            sp = mo.vsn_spectral(cfg.T, q, s, n, eta, kern, store, cfg.T_zero, table, step=cfg.step)
            em = mo.vsn_empirical(cfg.T, q, s, n, eta, kern, sp.extra["m_n"], table, store, cfg.T_zero, step=cfg.step, m_bound=sp.extra["m_bound"])
            diff = abs(sp.value - em.value)
            mt = mo.main_terms(q, n, s, eta).moment
            w.writerow([q, s, n, cfg.T, sp.value, sp.budget, em.value, em.budget, diff, diff <= sp.budget + em.budget, mt, round(time.time() - t0, 1)])
            out.flush()


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, nargs="+", default=Config().moduli)
    ap.add_argument("--pairs", nargs="+", default=["1,2", "2,2"], help="s,n pairs")
    ap.add_argument("--T", type=float, default=Config.T)
    ap.add_argument("--T-zero", type=float, default=Config.T_zero)
    ap.add_argument("--step", type=float, default=Config.step)
    ap.add_argument("--eta", default=Config.eta)
    ap.add_argument("--phi", default=Config.phi)
    ap.add_argument("--cache-dir")
    a = ap.parse_args()
    pairs = [tuple(int(v) for v in p.split(",")) for p in a.pairs]
    run(Config(a.q, pairs, a.T, a.T_zero, a.step, a.eta, a.phi, cache_dir=a.cache_dir), sys.stdout)


if __name__ == "__main__":
    main()
