"""Command line: rot, crot, lock, scan, renorm, verify-mobius, verify-bound, scaling, emit.

Exit codes: 0 success, 2 failed verification, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import atlas
from .circle import FourierLift, standard_family, standard_map
from .errors import CrotError, NumericalError
from .renorm import fundamental_data, renormalize, verify_mobius
from .rotation import locking_interval, rot
from .torus import crot

EXIT_OK, EXIT_FAILED, EXIT_NUMERICAL = 0, 2, 3


def _load_json(text_or_path):
    if os.path.exists(text_or_path):
        with open(text_or_path, encoding="utf-8") as fh:
            return json.load(fh)
    return json.loads(text_or_path)


def _map(args):
    if args.map is not None:
        return FourierLift.from_record(_load_json(args.map))
    return standard_map(args.epsilon, args.t)


def _print(obj):
    sys.stdout.write(atlas._encode(obj) + "\n")


def _out_path(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _scan_config(args):
    cfg = atlas.ScanConfig.load(args.config) if args.config else atlas.ScanConfig()
    if args.grid is not None:
        cfg.grid = args.grid
    if args.qmax is not None:
        cfg.q_max = args.qmax
    if args.jobs is not None:
        cfg.jobs = args.jobs
    return cfg


def cmd_rot(args):
    enc = rot(_map(args), tol=args.tol, return_enclosure=True)
    _print({"rot": enc.mid, "lo": enc.lo, "hi": enc.hi, "exact": None if enc.exact is None else str(enc.exact)})
    return EXIT_OK


def cmd_crot(args):
    res = crot(_map(args), Fraction(args.pq), N=args.grid or atlas.DEFAULT_N)
    _print({"pq": args.pq, "re_tau": res.tau.real, "im_tau": res.tau.imag, "pipeline": res.pipeline,
            "engine": res.engine, "error": res.error, "hyperbolic": res.hyperbolic})
    return EXIT_OK


def cmd_lock(args):
    fam = standard_family(args.epsilon, tuple(args.t_range))
    _print(locking_interval(fam, Fraction(args.pq)).to_record())
    return EXIT_OK


def cmd_scan(args):
    cfg = _scan_config(args)
    report = atlas.scan(cfg)
    path = atlas.emit(report, args.format, _out_path(args, f"scan.{args.format}"))
    if args.format != "jsonl":
        atlas.emit(report, "jsonl", _out_path(args, "scan.jsonl"))
    failures = sum(len(r.failures) for r in report.records)
    _print({"path": path, "records": len(report.records), "failures": failures})
    return EXIT_OK


def cmd_renorm(args):
    F = _map(args)
    fd = fundamental_data(F, "auto" if args.m is None else args.m)
    G, shift = renormalize(F, fd)
    _print({"m": fd.m, "q_m": fd.q_m, "L": fd.L, "shift": shift, "map": G.to_record()})
    return EXIT_OK


def cmd_verify_mobius(args):
    rep = verify_mobius(_map(args), Fraction(args.pq), args.m, N=args.grid or atlas.DEFAULT_N)
    rec = rep.to_record()
    rec["consistent"] = rep.consistent
    _print(rec)
    return EXIT_OK if rep.consistent and rep.rel_error < 1e-2 and rep.separation >= 10 else EXIT_FAILED


def cmd_verify_bound(args):
    if args.report:
        with open(args.report, encoding="utf-8") as fh:
            report = atlas.from_jsonl(fh.read())
    else:
        report = atlas.scan(_scan_config(args))
    checks = atlas.verify_q2_bound(report)
    for c in checks:
        _print({"pq": str(c.pq), "worst_margin": c.worst_margin, "passed": c.passed})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


def cmd_scaling(args):
    cfg = atlas.ScalingConfig.load(args.config) if args.config else atlas.ScalingConfig()
    if args.grid is not None:
        cfg.grid = args.grid
    if args.jobs is not None:
        cfg.jobs = args.jobs
    rep = atlas.scaling(cfg)
    rec = atlas.scaling_record(rep)
    with open(_out_path(args, "scaling.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(atlas._encode(rec) + "\n")
    _print(rec)
    return EXIT_OK if rep.decreasing and rep.lam_below_one else EXIT_FAILED


def cmd_emit(args):
    with open(args.report, encoding="utf-8") as fh:
        report = atlas.from_jsonl(fh.read())
    stem = os.path.splitext(os.path.basename(args.report))[0]
    _print({"path": atlas.emit(report, args.format, _out_path(args, f"{stem}.{args.format}"))})
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="crotnum", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def with_map(p):
        p.add_argument("--map", help="map record {c0, coef, h} as JSON text or file")
        p.add_argument("--epsilon", type=float, default=0.6, help="standard map nonlinearity (without --map)")
        p.add_argument("--t", type=float, default=0.0, help="standard map rotation parameter (without --map)")

    def with_common(p, config=True):
        if config:
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "jsonl", "svg"), default="jsonl")
        p.add_argument("--grid", type=int, help="torus grid size N")
        p.add_argument("--qmax", type=int, help="largest denominator")
        p.add_argument("--jobs", type=int, help="worker processes")

    p = sub.add_parser("rot", help="rotation number")
    with_map(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_rot)

    p = sub.add_parser("crot", help="complex rotation number of a map with rot = p/q")
    with_map(p)
    p.add_argument("--pq", required=True)
    p.add_argument("--grid", type=int)
    p.set_defaults(func=cmd_crot)

    p = sub.add_parser("lock", help="locking interval of p/q in the standard family")
    p.add_argument("--epsilon", type=float, default=0.6)
    p.add_argument("--pq", required=True)
    p.add_argument("--t-range", type=float, nargs=2, default=(-0.1, 1.1))
    p.set_defaults(func=cmd_lock)

    p = sub.add_parser("scan", help="bubble scan of a monotone family")
    with_common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("renorm", help="renormalized map")
    with_map(p)
    p.add_argument("--m", type=int)
    p.set_defaults(func=cmd_renorm)

    p = sub.add_parser("verify-mobius", help="compare tau of the renormalized map with both Mobius branches")
    with_map(p)
    p.add_argument("--pq", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--grid", type=int)
    p.set_defaults(func=cmd_verify_mobius)

    p = sub.add_parser("verify-bound", help="q^-2 disc containment of a scan")
    with_common(p)
    p.add_argument("--report", help="existing scan JSONL (otherwise the scan is run)")
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("scaling", help="bubble sizes along the convergents of alpha")
    with_common(p)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("emit", help="convert a scan JSONL to csv, jsonl or svg")
    with_common(p, config=False)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_emit)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERICAL
    except CrotError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
