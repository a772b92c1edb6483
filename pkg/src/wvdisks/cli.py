"""Command-line front end: ``wvdisks <command> [options]``.

Commands write CSV tables (17 significant digits) or JSON summaries to
``--out`` (default stdout).  A JSON ``--config`` file may supply any option
by its long name (dashes or underscores); explicit flags win.

Exit codes: 0 success, 1 a verdict or check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import borel, counterexample, entire, scales, wvlab
from .weights import WeightFunction, parse_psi

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS: Dict[str, Dict[str, object]] = {
    "profile": {"psi": "m=1,alpha=2,t0=e", "grid": "geom", "budget": 64},
    "verify": {"psi": "m=1,alpha=2,t0=e", "grid": "geom", "tol": 0.05, "samples": 64,
               "jitter": 0.0, "seed": 0},
    "construct": {"psi": "m=1,alpha=1,t0=e5", "rmax": 3.0, "table_factor": 1.2},
    "zeros": {"psi": "m=1,alpha=1,t0=e5", "rmax": 3.0, "table_factor": 1.2, "n_theta": 1024},
    "borel": {"lemma": "21", "points": 4000, "psi": "m=1,alpha=2,t0=e3", "eps": 0.5},
    "scales": {"psi": "m=1,alpha=1,t0=e5", "rmax": 3.0, "format": "csv", "pts_per_decade": 256},
}


class UsageError(ValueError):
    pass


# -- parsing helpers ------------------------------------------------------------


def parse_grid(spec: str, kind: str = "geom") -> np.ndarray:
    """``lo:hi:n`` (geometric or linear grid), ``lo:hi`` (n=2), ``a,b,c`` or a single value."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            parts = [p for p in spec.split(":")]
            lo, hi = float(parts[0]), float(parts[1])
            n = int(parts[2]) if len(parts) > 2 else 2
            if not (0 < lo <= hi) or n < 1 or len(parts) > 3:
                raise UsageError(f"bad range {spec!r}: need 0 < lo <= hi and n >= 1")
            if n == 1:
                return np.array([lo])
            return np.geomspace(lo, hi, n) if kind == "geom" else np.linspace(lo, hi, n)
        vals = np.array([float(p) for p in spec.split(",")])
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad grid {spec!r}: {exc}") from exc
    if np.any(vals <= 0) or np.any(np.diff(vals) <= 0):
        raise UsageError(f"grid {spec!r} must be positive and increasing")
    return vals


def parse_range(spec: str) -> tuple:
    try:
        lo, hi = (float(p) for p in str(spec).split(":"))
    except ValueError as exc:
        raise UsageError(f"bad range {spec!r}, expected lo:hi") from exc
    if not lo < hi:
        raise UsageError(f"bad range {spec!r}: lo must be < hi")
    return lo, hi


def _psi(spec: str) -> WeightFunction:
    try:
        return parse_psi(str(spec))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _series(name: Optional[str]) -> entire.PowerSeries:
    if not name:
        raise UsageError(f"--fn is required; known: {', '.join(entire.series_names())}")
    try:
        return entire.get_series(name)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- commands -------------------------------------------------------------------


def cmd_profile(o: dict) -> int:
    f = _series(o.get("fn"))
    psi = _psi(o["psi"])
    if o.get("r") is None:
        raise UsageError("--r is required")
    grid = parse_grid(o["r"], o["grid"])
    prof = entire.profile(f, grid, psi, int(o["budget"]))
    _emit(prof.to_csv(), o.get("out"))
    bad = [row for row in prof.rows if not row.ok]
    for row in bad:
        print(f"row r={row.r!r}: {'; '.join(row.flags)}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_verify(o: dict) -> int:
    f = _series(o.get("fn"))
    psi = _psi(o["psi"])
    if o.get("r") is None:
        raise UsageError("--r is required")
    grid = parse_grid(o["r"], o["grid"])
    reports = [wvlab.verify_disk(f, float(r), psi, int(o["samples"]), float(o["tol"]),
                                 jitter=float(o["jitter"]), seed=int(o["seed"]))
               for r in grid]
    res = wvlab.sweep_from_reports(reports, float(o["tol"]), f.name, psi)
    _emit(res.to_csv(), o.get("out"))
    summary = res.to_json() + "\n"
    if o.get("summary"):
        _emit(summary, o["summary"])
    else:
        sys.stderr.write(summary)
    return EXIT_OK if res.all_pass else EXIT_FAIL


def _product(o: dict) -> counterexample.ProductFunction:
    psi = _psi(o["psi"])
    rmax = float(o["rmax"])
    if not rmax > 1:
        raise UsageError("--rmax must exceed 1")
    sc = scales.build(psi, rmax * float(o["table_factor"]))
    return counterexample.construct(sc, rmax)


def cmd_construct(o: dict) -> int:
    pf = _product(o)
    _emit(_json(pf.summary()), o.get("out"))
    return EXIT_OK


def cmd_zeros(o: dict) -> int:
    if o.get("r") is None:
        raise UsageError("--r is required")
    pf = _product(o)
    r = float(o["r"])
    if not 0 < r <= pf.r_max_valid:
        raise UsageError(f"--r must lie in (0, r_max_valid={pf.r_max_valid!r}]")
    rows = wvlab.zero_certificates(pf, r, int(o["n_theta"]))
    lines = ["theta,distance,bound_9r_over_sqrtA2,pass"]
    lines += [f"{row['theta']:.17g},{row['distance']:.17g},{row['bound_9r_over_sqrtA2']:.17g},"
              f"{'true' if row['pass'] else 'false'}" for row in rows]
    _emit("\n".join(lines) + "\n", o.get("out"))
    return EXIT_OK if all(row["pass"] for row in rows) else EXIT_FAIL


_T_FUNCTIONS = {
    "exp": math.exp,
    "linear": lambda x: 25.0 * x,
    "square": lambda x: x * x,
    "const": lambda x: math.e,
}


def cmd_borel(o: dict) -> int:
    name = o.get("T")
    if name not in _T_FUNCTIONS:
        raise UsageError(f"--T must be one of {sorted(_T_FUNCTIONS)}")
    if o.get("range") is None:
        raise UsageError("--range is required")
    lo, hi = parse_range(o["range"])
    n = int(o["points"])
    if n < 3:
        raise UsageError("--points must be >= 3")
    sample = borel.MonotoneSample.from_function(_T_FUNCTIONS[name], lo, hi, n)
    lemma = str(o["lemma"])
    if lemma == "21":
        s = borel.power_log(1.0, 0.5, 1.0, 2.0)
        delta = o.get("delta")
        if delta is None:
            ts = np.geomspace(sample.Ts[0], max(sample.Ts[-1], sample.Ts[0] * (1 + 1e-9)), 256)
            delta = 1.0 - max(s.log_slope(float(t)) for t in ts)
        rep = borel.scan_lemma21(sample, s, s, float(delta))
    elif lemma == "22":
        rep = borel.scan_lemma22(sample, _psi(o["psi"]), float(o["eps"]))
    else:
        raise UsageError("--lemma must be 21 or 22")
    out = rep.to_dict()
    out["within_bound"] = rep.within_bound()
    _emit(_json(out), o.get("out"))
    return EXIT_OK if rep.within_bound() else EXIT_FAIL


def cmd_scales(o: dict) -> int:
    if o.get("action", "export") != "export":
        raise UsageError("only 'export' is supported")
    sc = scales.build(_psi(o["psi"]), float(o["rmax"]), int(o["pts_per_decade"]))
    fmt = o["format"]
    if fmt == "csv":
        _emit(sc.to_csv(), o.get("out"))
    elif fmt == "json":
        _emit(_json({
            "psi": sc.psi.to_dict(), "K": sc.K, "L": sc.L,
            "columns": ["r", "A0", "A1", "A2", "A3", "g"],
            "rows": [[float(v) for v in row] for row in sc.rows()],
        }), o.get("out"))
    else:
        raise UsageError("--format must be csv or json")
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile, "verify": cmd_verify, "construct": cmd_construct,
    "zeros": cmd_zeros, "borel": cmd_borel, "scales": cmd_scales,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", help="output file (default stdout)")

    p = argparse.ArgumentParser(prog="wvdisks", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", parents=[common], help="growth profile CSV of a power series")
    sp.add_argument("--fn")
    sp.add_argument("--r", help="radius grid lo:hi:n, list or value")
    sp.add_argument("--grid", choices=["geom", "lin"])
    sp.add_argument("--psi")
    sp.add_argument("--budget", type=int)

    sp = sub.add_parser("verify", parents=[common], help="flat-disk check over a radius grid")
    sp.add_argument("--fn")
    sp.add_argument("--r")
    sp.add_argument("--grid", choices=["geom", "lin"])
    sp.add_argument("--psi")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--samples", type=int)
    sp.add_argument("--jitter", type=float, help="random angle jitter, in units of the sample spacing")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--summary", help="path for the JSON summary (default stderr)")

    for name, helptext in (("construct", "build the zero-circle product and summarise it"),
                           ("zeros", "nearest-zero certificates on a circle")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--psi")
        sp.add_argument("--rmax", type=float)
        sp.add_argument("--table-factor", type=float, dest="table_factor")
        if name == "zeros":
            sp.add_argument("--r", type=float)
            sp.add_argument("--n-theta", type=int, dest="n_theta")

    sp = sub.add_parser("borel", parents=[common], help="exceptional-set scan of a sampled function")
    sp.add_argument("--T", dest="T")
    sp.add_argument("--range")
    sp.add_argument("--points", type=int)
    sp.add_argument("--lemma", choices=["21", "22"])
    sp.add_argument("--delta", type=float)
    sp.add_argument("--psi")
    sp.add_argument("--eps", type=float)

    sp = sub.add_parser("scales", parents=[common], help="export the growth-scale table")
    sp.add_argument("action", nargs="?", default="export")
    sp.add_argument("--psi")
    sp.add_argument("--rmax", type=float)
    sp.add_argument("--format", choices=["csv", "json"])
    sp.add_argument("--pts-per-decade", type=int, dest="pts_per_decade")
    return p


def _options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS.get(args.command, {}))
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        opts.update({k.replace("-", "_"): v for k, v in cfg.items()})
    opts.update({k: v for k, v in vars(args).items() if v is not None})
    return opts


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        opts = _options(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"wvdisks {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"wvdisks {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
