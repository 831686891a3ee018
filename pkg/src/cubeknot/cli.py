"""Command line: ``cubeknot cubulate | plane-demo | verify``.

Exit codes: 0 pass, 1 verification failure, 2 bad input or precondition,
3 internal invariant violation or exhausted scale retries.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .errors import CubeKnotError, PreconditionError
from .invariants import format_report
from .pipeline import RunConfig, cubulate, parse_plane, plane_demo, verify_cycle


def _param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    for cast in (int, float):
        try:
            return key, cast(value)
        except ValueError:
            pass
    return key, value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cubeknot", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cubulate", help="push a knot into the lattice 1-skeleton")
    c.add_argument("--config", help="flat key = value config file; flags override it")
    c.add_argument("--preset", choices=["unknot", "trefoil", "torus", "figure_eight", "polyline"])
    c.add_argument("--polyline", help="text file, one 'x y z' per line")
    c.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE",
                   help="preset parameter, e.g. p=2 q=5 R=2 r_t=0.8 radius=2")
    c.add_argument("-r", "--radius", type=float, dest="r", help="tube radius")
    c.add_argument("--scale", help="'auto' or a fixed subdivision m")
    c.add_argument("--h-max", type=float, dest="h_max", help="maximum sample spacing")
    c.add_argument("--n-theta", type=int, dest="n_theta", help="tube mesh segments around the circle")
    c.add_argument("--seed", type=int)
    c.add_argument("--cap", type=int, help="crossing cap for the bracket")
    c.add_argument("-o", "--out", help="output directory")
    c.add_argument("--threads", type=int, default=None, help="worker threads (default: all CPUs)")

    p = sub.add_parser("plane-demo", help="lattice path replacing the line where two orthogonal planes meet")
    p.add_argument("--p1", required=True, help="plane a,b,c,d meaning a x + b y + c z = d")
    p.add_argument("--p2", required=True)
    p.add_argument("-m", type=int, default=4, help="subdivision")
    p.add_argument("--half", type=int, default=8, help="window [-half, half)^3 in lattice units")
    p.add_argument("-o", "--out", help="write path.json, sheet.obj and band.obj here")

    v = sub.add_parser("verify", help="compare a saved cycle against a reference knot")
    v.add_argument("cycle", help="cycle JSON written by cubulate")
    v.add_argument("--preset", default="trefoil", choices=["unknot", "trefoil", "torus", "figure_eight", "polyline"])
    v.add_argument("--polyline", default="")
    v.add_argument("--param", type=_param, action="append", default=[], metavar="NAME=VALUE")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--cap", type=int, default=22)
    v.add_argument("--json", action="store_true", help="print the report as JSON")
    return parser


def _config(args) -> RunConfig:
    base = RunConfig.read(args.config).to_dict() if args.config else {}
    for key in ("preset", "polyline", "r", "scale", "h_max", "n_theta", "seed", "cap", "out"):
        val = getattr(args, key)
        if val is not None:
            base[key] = val
    if args.param:
        base["params"] = {**base.get("params", {}), **dict(args.param)}
    return RunConfig(**base)


def _cubulate(args) -> int:
    config = _config(args)
    threads = args.threads if args.threads is not None else os.cpu_count()
    result = cubulate(config, threads=threads)
    man = result.manifest
    print(f"m = {man.scale} (retries: {man.retries}), cycle length {man.cycle['length']}")
    print(format_report(man.report))
    print(f"artifacts in {config.out}")
    return result.exit_code


def _plane_demo(args) -> int:
    res = plane_demo(parse_plane(args.p1), parse_plane(args.p2), args.m, args.half, args.out)
    print(json.dumps({"m": res["m"], "vertices": res["vertices"]}))
    return 0


def _verify(args) -> int:
    report = verify_cycle(args.cycle, args.preset, args.polyline, args.seed, args.cap, **dict(args.param))
    print(json.dumps(report, indent=2) if args.json else format_report(report))
    return 0 if report["status"] == "PASS" else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handler = {"cubulate": _cubulate, "plane-demo": _plane_demo, "verify": _verify}[args.command]
    try:
        return handler(args)
    except CubeKnotError as exc:
        where = f" [{exc.stage}]" if exc.stage else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return PreconditionError.exit_code


if __name__ == "__main__":
    sys.exit(main())
