"""Command-line entry point: ``momlab <command> [flags]``.

Results go to stdout as JSON.  With ``--out DIR`` they are also written to
DIR (JSON, plus CSV for tabular commands) next to an append-only run
manifest.  Exit codes: 1 validation error, 2 budget or tolerance failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import combinatorics as comb
from . import model as md
from . import moments as mo
from .arith import CapacityError, DomainError, character_group, sieve_lambda
from .explicit import TableTooSmall, psi_eta_ap, psi_eta_char, psi_eta_zero_side
from .weights import MembershipError, QuadratureError, WeightSpecError, kernel, make_weight
from .zeros import CompletenessError, InsufficientZeros, ZeroBudgetError, ZeroFormatError, cache_root, cached_store, load_zeros

COMMANDS = ("chars", "zeros", "psi", "moments", "vmoment", "combin", "model", "omega-search", "histogram", "verify")

DEFAULTS = {
    "eta": "expK:1",
    "phi": "triangle",
    "seed": 0,
    "budget": mo.TUPLE_BUDGET,
    "tol": 1e-9,
    "table": 0,
    "T_zero": 100.0,
}

BUDGET_ERRORS = (
    mo.BudgetError,
    comb.EnumerationBudget,
    CapacityError,
    TableTooSmall,
    CompletenessError,
    InsufficientZeros,
    ZeroBudgetError,
    QuadratureError,
)
VALIDATION_ERRORS = (
    ValueError,
    KeyError,
    WeightSpecError,
    MembershipError,
    DomainError,
    ZeroFormatError,
    comb.CombinatoricsError,
    md.ModelError,
    jsonschema.ValidationError,
)


class ToleranceFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# config and helpers


def read_config(path) -> dict:
    """key = value lines; '#' starts a comment; values are parsed as int, float or left as strings."""
    out = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{i}: expected key = value")
        k, v = (p.strip() for p in line.split("=", 1))
        k = k.replace("-", "_")
        for cast in (int, float):
            try:
                v = cast(v)
                break
            except ValueError:
                pass
        out[k] = v
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    cfg = read_config(args.config) if args.config else {}
    out = {}
    for k, v in vars(args).items():
        if k in ("config", "func"):
            continue
        if v is None:
            v = cfg.get(k, DEFAULTS.get(k))
        out[k] = v
    for k, v in cfg.items():
        out.setdefault(k, v)
    return out


def parse_grid(spec: str) -> np.ndarray:
    """``a,b,c`` for explicit values or ``lo:hi:count`` for a logarithmic grid."""
    if ":" in spec:
        lo, hi, cnt = spec.split(":")
        return np.geomspace(float(lo), float(hi), int(cnt))
    return np.array([float(v) for v in spec.split(",")])


def table_for(xmax: float, override: int) -> object:
    N = int(override) if override else int(min(max(10**6, 4 * xmax), 10**8))
    return sieve_lambda(N)


def schema(name: str) -> dict:
    return json.loads(resources.files("momlab").joinpath("schemas", f"{name}.json").read_text())


def validate(name: str, obj: dict) -> None:
    jsonschema.validate(obj, schema(name))


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _clean(v) for k, v in r.items()})
    return buf.getvalue()


def run_id(command: str, opts: dict) -> str:
    key = json.dumps(_clean({"command": command, **{k: v for k, v in opts.items() if k not in ("out",)}}), sort_keys=True)
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def emit(command: str, opts: dict, result: dict, rows: list[dict] | None, t0: float, provenance=None) -> None:
    rid = run_id(command, opts)
    result = {"command": command, "manifest": f"manifest-{rid}.jsonl", **result}
    validate(command, _clean(result))
    text = dumps(result)
    sys.stdout.write(text)
    out = opts.get("out")
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    files = [f"{command}-{rid}.json"]
    (d / files[0]).write_text(text)
    if rows is not None:
        files.append(f"{command}-{rid}.csv")
        (d / files[1]).write_text(to_csv(rows))
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "options": opts,
        "seed": opts.get("seed"),
        "tolerances": {"tol": opts.get("tol")},
        "budgets": {"budget": opts.get("budget")},
        "zero_data": provenance or [],
        "version": __version__,
        "wall_time": time.time() - t0,
        "files": files,
    }
    validate("manifest", _clean(manifest))
    with open(d / f"manifest-{rid}.jsonl", "a") as fh:
        fh.write(json.dumps(_clean(manifest), sort_keys=True) + "\n")


def _provenance(store) -> list[dict]:
    return [
        {"q": q, "conrey": c, "provenance": zl.provenance, "T_cert": zl.T_cert, "sha256": zl.sha256}
        for (q, c), zl in sorted(store.lists.items())
    ]


def _store(q: int, T: float, opts: dict):
    return cached_store(q, T, cache_root(opts.get("cache_dir")))


# ---------------------------------------------------------------------------
# commands


def cmd_chars(o, t0):
    g = character_group(o["q"])
    chars = [c.to_dict() for c in g]
    emit("chars", o, {"q": g.q, "phi": g.phi, "characters": chars}, None, t0)


def cmd_zeros(o, t0):
    q, T = o["q"], o["T"]
    if o.get("file"):
        store = load_zeros(o["file"])
    else:
        store = _store(q, T, o)
    recs = []
    for (qq, c), zl in sorted(store.lists.items()):
        if qq != q:
            continue
        hs = zl.heights[zl.heights <= T]
        recs.append({"conrey": c, "count": len(hs), "T_cert": zl.T_cert, "first": float(hs[0]) if len(hs) else None, "sha256": zl.sha256, "provenance": zl.provenance})
    emit("zeros", o, {"q": q, "T": T, "characters": recs}, [dict(r) for r in recs], t0, _provenance(store))


def cmd_psi(o, t0):
    x, q = o["x"], o["q"]
    eta = make_weight(o["eta"])
    table = table_for(x, o["table"])
    res = {"x": x, "q": q, "eta": eta.spec, "side": o["side"]}
    prov = None
    if o.get("a") is not None:
        if o["side"] != "prime":
            raise ValueError("residue classes only have a prime side")
        v = psi_eta_ap(x, q, o["a"], eta, table)
        res["a"] = o["a"]
    else:
        c = o["conrey"] if o.get("conrey") is not None else 1
        res["conrey"] = c
        if o["side"] == "zero":
            store = _store(q, o["T_zero"], o)
            v = psi_eta_zero_side(x, q, c, eta, store, o["T_zero"], table)
            prov = _provenance(store)
        else:
            v = psi_eta_char(x, q, c, eta, table)
    res.update({"value": complex(v.value).real, "imag": complex(v.value).imag, "bound": v.bound})
    emit("psi", o, res, None, t0, prov)


def cmd_moments(o, t0):
    q, n = o["q"], o["n"]
    eta = make_weight(o["eta"])
    xs = parse_grid(o["grid"]) if o.get("grid") else np.array([o["x"]])
    table = table_for(float(xs.max()), o["table"])
    rows = []
    for x in xs:
        r = mo.moment_residue_side(float(x), q, n, eta, table)
        row = {"x": float(x), "q": q, "n": n, "residue_side": r.value, "bound": r.trunc_err}
        if o["side"] in ("character", "both"):
            c = mo.moment_character_side(float(x), q, n, eta, table, o["budget"])
            row["character_side"] = c.value
            row["rel_diff"] = abs(r.value - c.value) / max(abs(r.value), 1e-300)
        rows.append(row)
    emit("moments", o, {"q": q, "n": n, "eta": eta.spec, "rows": rows}, rows, t0)


def cmd_vmoment(o, t0):
    q, s, n, T = o["q"], o["s"], o["n"], o["T"]
    eta = make_weight(o["eta"])
    kern = kernel(o["phi"])
    Tz = o["T_zero"]
    store = _store(q, Tz, o)
    table = table_for(10**6, o["table"])
    step = float(o["grid"]) if o.get("grid") else 0.01
    sp = mo.vsn_spectral(T, q, s, n, eta, kern, store, Tz, table, step=step)
    res = {"q": q, "s": s, "n": n, "T": T, "eta": eta.spec, "phi": kern.name, "spectral": sp.to_dict()}
    mt = mo.main_terms(q, n, s, eta)
    res["main_terms"] = {"V_n": mt.V_n, "moment": mt.moment, "mean": mt.mean}
    ok = True
    if o["mode"] in ("empirical", "both"):
        em = mo.vsn_empirical(T, q, s, n, eta, kern, sp.extra["m_n"], table, store, Tz, step=step, m_bound=sp.extra["m_bound"])
        res["empirical"] = em.to_dict()
        res["difference"] = abs(em.value - sp.value)
        res["combined_budget"] = em.budget + sp.budget
        ok = bool(res["difference"] <= res["combined_budget"])
        res["agree"] = ok
    emit("vmoment", o, res, None, t0, _provenance(store))
    if not ok:
        raise ToleranceFailure("spectral and empirical sides differ by more than the combined budget")


def cmd_combin(o, t0):
    rec = comb.enumerate_class(o["s"], o["n"], o["class_"], max_points=o.get("max_points") or comb.MAX_POINTS)
    f = comb.formula_value(o["s"], o["n"]) if o["class_"] == "F" else None
    res = {
        "s": o["s"],
        "n": o["n"],
        "class": o["class_"],
        "count": rec.count,
        "scanned": rec.scanned,
        "formula_value": None if f is None else (int(f) if f.denominator == 1 else float(f)),
        "match": None if f is None else rec.count == f,
    }
    emit("combin", o, res, None, t0)


def cmd_model(o, t0):
    q, n = o["q"], o["n"]
    eta = make_weight(o["eta"])
    store = _store(q, o["T_zero"], o)
    b = md.sample_H(q, n, eta, store, o["mode"] or "li", o["seed"], o["samples"] or 10_000, o["T_zero"])
    est = md.estimate_moments(b, eta=eta, n_boot=o.get("boot") or 100, seed=o["seed"])
    res = {
        "q": q,
        "n": n,
        "mode": b.mode,
        "seed": b.seed,
        "samples": b.count,
        "mean": b.mean(),
        "stderr": b.stderr(),
        "imag_residue": b.imag_residue,
        "moments": [{"s": e.s, "value": e.value, "stderr": e.stderr, "prediction": e.prediction} for e in est],
    }
    if n == 2:
        m, bnd = md.model_mean_exact(q, n, eta, store, o["T_zero"])
        res["exact_mean"] = m
        res["exact_mean_tail"] = bnd
    rows = [{"index": i, "H": float(v)} for i, v in enumerate(b.values)] if o.get("dump") else None
    emit("model", o, res, rows, t0, _provenance(store))


def cmd_omega(o, t0):
    q = o["q"]
    eta = make_weight(o["eta"])
    xs = parse_grid(o["grid"] or "1e3:1e7:200")
    table = table_for(float(xs.max()), o["table"])
    hits = mo.omega_search(q, eta, xs, o["epsilon"], table, o["mode"] or "m2", m=o.get("m") or 1, c=o.get("c") or 1.0)
    rows = [h.to_dict() for h in hits]
    res = {"q": q, "eta": eta.spec, "mode": o["mode"] or "m2", "epsilon": o["epsilon"], "grid_points": len(xs), "table_limit": table.limit, "hits": rows}
    emit("omega-search", o, res, rows, t0)


def cmd_histogram(o, t0):
    q, x = o["q"], o["x"]
    table = table_for(x, o["table"])
    h = mo.distribution_histogram(x, q, o["bins"], table)
    rows = [{"lo": float(a), "hi": float(b), "count": int(c)} for a, b, c in zip(h.edges[:-1], h.edges[1:], h.counts)]
    tails = [{"V": v, "empirical": e, "gaussian": g} for v, e, g in h.tails]
    emit("histogram", o, {"q": q, "x": x, "bins": rows, "tails": tails}, rows, t0)


def cmd_verify(o, t0):
    from .verify import run_checks

    checks = run_checks(o["level"] or "quick")
    ok = all(c["passed"] for c in checks)
    emit("verify", o, {"level": o["level"] or "quick", "passed": ok, "checks": checks}, checks, t0)
    if not ok:
        raise ToleranceFailure("verification failed")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eta", help="weight: expK:<K> | selfconv:<bump> | classical")
    common.add_argument("--phi", help="time kernel: triangle | indicator")
    common.add_argument("--seed", type=int)
    common.add_argument("--budget", type=int, help="tuple budget")
    common.add_argument("--tol", type=float)
    common.add_argument("--out", help="directory for result files and the manifest")
    common.add_argument("--cache-dir", dest="cache_dir", help="zero cache root (default $MOMLAB_CACHE or ./cache)")
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--table", type=int, help="sieve limit for the prime table")
    common.add_argument("--T-zero", dest="T_zero", type=float, help="height of the zero lists used")

    p = argparse.ArgumentParser(prog="momlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("chars", parents=[common], help="character table mod q")
    s.add_argument("--q", type=int, required=True)
    s.set_defaults(func=cmd_chars)

    s = sub.add_parser("zeros", parents=[common], help="compute, cache or ingest zeros")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--file", help="ingest a zeros TSV instead of computing")
    s.set_defaults(func=cmd_zeros)

    s = sub.add_parser("psi", parents=[common], help="weighted prime count for a class or character")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--x", type=float, required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--a", type=int)
    g.add_argument("--conrey", type=int)
    s.add_argument("--side", choices=("prime", "zero"), default="prime")
    s.set_defaults(func=cmd_psi)

    s = sub.add_parser("moments", parents=[common], help="moments over residues at x")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--x", type=float)
    s.add_argument("--grid", help="a,b,c or lo:hi:count (log spaced)")
    s.add_argument("--side", choices=("residue", "character", "both"), default="both")
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("vmoment", parents=[common], help="moments of moments over log-time")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--mode", choices=("spectral", "empirical", "both"), default="both")
    s.add_argument("--grid", help="time step of the quadrature grid")
    s.set_defaults(func=cmd_vmoment)

    s = sub.add_parser("combin", parents=[common], help="count involution classes")
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--class", dest="class_", choices=comb.TAGS, default="F")
    s.add_argument("--max-points", dest="max_points", type=int)
    s.set_defaults(func=cmd_combin)

    s = sub.add_parser("model", parents=[common], help="sample the random-phase model")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--mode", choices=md.MODES)
    s.add_argument("--samples", type=int)
    s.add_argument("--boot", type=int, help="bootstrap resamples")
    s.add_argument("--dump", action="store_true", help="write the samples as CSV")
    s.set_defaults(func=cmd_model)

    s = sub.add_parser("omega-search", parents=[common], help="grid points with large moments")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--grid", help="a,b,c or lo:hi:count (log spaced)")
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--mode", choices=("m2", "m2m", "raw"))
    s.add_argument("--m", type=int)
    s.add_argument("--c", type=float)
    s.set_defaults(func=cmd_omega)

    s = sub.add_parser("histogram", parents=[common], help="distribution of normalised deviations over residues")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--x", type=float, required=True)
    s.add_argument("--bins", type=int, default=20)
    s.set_defaults(func=cmd_histogram)

    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--level", choices=("quick", "full"))
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    try:
        opts = resolve(args)
        args.func(opts, t0)
    except (ToleranceFailure, *BUDGET_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
