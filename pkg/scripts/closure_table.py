"""Prime side against zero side of the weighted count, per character and log x.

    python scripts/closure_table.py --q 3 4 5 7 --T 200 400 > closure.csv
"""

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field

from momlab.arith import character_group, sieve_lambda
from momlab.explicit import psi_eta_char, psi_eta_zero_side
from momlab.weights import make_weight
from momlab.zeros import cache_root, cached_store


@dataclass
class Config:
    moduli: list = field(default_factory=lambda: [3, 4, 5, 7])
    heights: list = field(default_factory=lambda: [200.0, 400.0])
    t_values: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    eta: str = "expK:1"
    table: int = 2 * 10**6
    cache_dir: str | None = None


def run(cfg: Config, out) -> None:
    eta = make_weight(cfg.eta)
    table = sieve_lambda(cfg.table)
    w = csv.writer(out)
    w.writerow(["q", "conrey", "t", "T_zero", "prime_re", "prime_im", "zero_re", "zero_im", "residual", "bound", "ratio"])
    top = max(cfg.heights)
    for q in cfg.moduli:
        store = cached_store(q, top, cache_root(cfg.cache_dir))
        for c in character_group(q).nonprincipal():
            for t in cfg.t_values:
                x = math.exp(t)
                p = psi_eta_char(x, q, c.conrey, eta, table)
                for T in cfg.heights:
                    z = psi_eta_zero_side(x, q, c.conrey, eta, store, T, table)
                    res = abs(p.value - z.value)
                    bnd = p.bound + z.bound
                    w.writerow([q, c.conrey, t, T, p.value.real, p.value.imag, z.value.real, z.value.imag, res, bnd, res / bnd])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, nargs="+", default=Config().moduli)
    ap.add_argument("--T", type=float, nargs="+", default=Config().heights)
    ap.add_argument("--eta", default=Config.eta)
    ap.add_argument("--table", type=int, default=Config.table)
    ap.add_argument("--cache-dir")
    a = ap.parse_args()
    run(Config(moduli=a.q, heights=a.T, eta=a.eta, table=a.table, cache_dir=a.cache_dir), sys.stdout)


if __name__ == "__main__":
    main()
