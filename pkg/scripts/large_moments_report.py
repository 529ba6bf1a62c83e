"""Report for a large modulus: grid points with large M_2, raw deviation hits and the residue histogram.

    python scripts/large_moments_report.py --q 101 --xmax 1e7
"""

import argparse
import json
import math
from dataclasses import dataclass

import numpy as np

from momlab import moments as mo
from momlab.arith import character_group, sieve_lambda
from momlab.weights import make_weight


@dataclass
class Config:
    q: int = 101
    xmin: float = 1e3
    xmax: float = 1e7
    points: int = 200
    epsilon: float = 0.5
    c: float = 1.0
    bins: int = 20
    eta: str = "expK:1"


def run(cfg: Config) -> dict:
    eta = make_weight(cfg.eta)
    table = sieve_lambda(int(min(max(10**6, 4 * cfg.xmax), 10**8)))
    xs = np.geomspace(cfg.xmin, cfg.xmax, cfg.points)
    phi = character_group(cfg.q).phi
    hits = mo.omega_search(cfg.q, eta, xs, cfg.epsilon, table)
    raw = mo.omega_search(cfg.q, eta, xs, cfg.epsilon, table, mode="raw", c=cfg.c)
    h = mo.distribution_histogram(cfg.xmax, cfg.q, cfg.bins, table)
    t = np.log(xs)
    m2 = [mo.moment_residue_side(float(x), cfg.q, 2, eta, table).value for x in xs[:: max(1, cfg.points // 20)]]
    return {
        "q": cfg.q,
        "alpha_log_q_over_phi": eta.spectral().alpha() * math.log(cfg.q) / phi,
        "m2_hits": len(hits),
        "m2_sample": [{"x": float(x), "M2": v} for x, v in zip(xs[:: max(1, cfg.points // 20)], m2)],
        "raw_hits": len(raw),
        "raw_classes": sorted({r.residue for r in raw}),
        "histogram": {"counts": h.counts.tolist(), "edges": h.edges.tolist()},
        "tails": [{"V": v, "empirical": e, "gaussian": g} for v, e, g in h.tails],
        "log_x_range": [float(t[0]), float(t[-1])],
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, default=Config.q)
    ap.add_argument("--xmax", type=float, default=Config.xmax)
    ap.add_argument("--points", type=int, default=Config.points)
    ap.add_argument("--epsilon", type=float, default=Config.epsilon)
    ap.add_argument("--c", type=float, default=Config.c)
    ap.add_argument("--eta", default=Config.eta)
    a = ap.parse_args()
    cfg = Config(q=a.q, xmax=a.xmax, points=a.points, epsilon=a.epsilon, c=a.c, eta=a.eta)
    print(json.dumps(run(cfg), indent=2))


if __name__ == "__main__":
    main()
