"""Command-line front end: ``ideflow simulate|verify|analyze|gen|list``.

Every path except argument errors prints one JSON document on stdout.
Exit codes: 0 success, 1 failed verification, 2 usage or input errors,
3 engine caps (phase cap reached, thin-flow guess cap exceeded).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .engine import EngineConfig, detect_periodicity, report_to_dict, simulate
from .flowstate import load_trace, save_trace, trace_to_csv
from .instances import BUILTINS, ParamError, RandomParams, builtin, gen_random
from .network import ParseError, ValidationError, load_instance, save_instance
from .numerics import rat
from .thinflow import CapExceeded, NoSolution
from .verify import verify_feasible, verify_ide, verify_termination

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _read_instance(ref: str):
    """A JSON file path, or a builtin instance name when no such file exists."""
    path = Path(ref)
    if path.is_file():
        try:
            return load_instance(path.read_bytes())
        except (ParseError, ValidationError) as exc:
            raise InputError(f"{ref}: {exc}") from exc
    if ref in BUILTINS:
        return builtin(ref)
    raise InputError(f"{ref}: no such file or builtin instance")


def _read_trace(ref: str, inst=None):
    try:
        return load_trace(Path(ref).read_bytes(), inst)
    except OSError as exc:
        raise InputError(f"{ref}: {exc.strerror}") from exc
    except ValueError as exc:
        raise InputError(f"{ref}: {exc}") from exc


def _rational(text: str):
    try:
        return rat(text)
    except (ValueError, TypeError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    inst = _read_instance(args.instance)
    cfg = EngineConfig(args.horizon, max_phases=args.max_phases, mode=args.mode)
    try:
        report = simulate(inst, cfg)
    except CapExceeded as exc:
        _emit({"error": "cap_exceeded", "message": str(exc)})
        return EXIT_CAP
    except NoSolution as exc:
        _emit({"error": "no_solution", "message": str(exc)})
        return EXIT_FAIL
    if args.out:
        _write(args.out, save_trace(report.trace))
    if args.csv:
        _write(args.csv, trace_to_csv(report.trace))
    _emit(report_to_dict(report))
    return EXIT_CAP if report.outcome.kind == "PhaseCapReached" else EXIT_OK


def cmd_verify(args) -> int:
    inst = _read_instance(args.instance)
    trace = _read_trace(args.trace, inst)
    verdict = verify_feasible(inst, trace)
    if verdict.passed:
        verdict.extend(verify_ide(inst, trace))
    if args.claim_termination is not None:
        verdict.extend(verify_termination(inst, trace, args.claim_termination))
    _emit(verdict.to_json())
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_analyze(args) -> int:
    trace = _read_trace(args.trace)
    found = detect_periodicity(trace, args.start, args.detect_period)
    _emit({"periodicity": None if found is None else {"period": str(found[0]), "from": str(found[1])}})
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.name == "random":
        params = RandomParams(n=args.nodes, m=args.edges, sinks=args.sinks,
                              acyclic=args.acyclic, commodities=args.commodities)
        inst = gen_random(args.seed, params)
    else:
        inst = builtin(args.name)
    _write(args.out, save_instance(inst))
    _emit({"written": args.out, "nodes": len(inst.nodes), "edges": len(inst.edges),
           "commodities": len(inst.commodities)})
    return EXIT_OK


def cmd_list(args) -> int:
    _emit({"instances": sorted(BUILTINS)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ideflow", description="Exact IDE flow simulation and verification.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the phase engine")
    s.add_argument("instance", help="instance JSON file or builtin name")
    s.add_argument("--horizon", type=_rational, required=True)
    s.add_argument("--max-phases", type=int, default=10**5)
    s.add_argument("--mode", choices=("auto", "waterfill", "thinflow"), default="auto")
    s.add_argument("--out", help="trace JSON output path")
    s.add_argument("--csv", help="long-format CSV output path")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check a trace against an instance")
    v.add_argument("instance")
    v.add_argument("trace")
    v.add_argument("--claim-termination", type=_rational)
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("analyze", help="detect a period in a trace")
    a.add_argument("trace")
    a.add_argument("--detect-period", type=_rational, required=True, metavar="P")
    a.add_argument("--from", dest="start", type=_rational, required=True, metavar="R")
    a.set_defaults(func=cmd_analyze)

    g = sub.add_parser("gen", help="write a builtin or random instance")
    g.add_argument("name", help="builtin name or 'random'")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nodes", type=int, default=RandomParams.n)
    g.add_argument("--edges", type=int, default=RandomParams.m)
    g.add_argument("--sinks", type=int, default=RandomParams.sinks)
    g.add_argument("--commodities", type=int, default=RandomParams.commodities)
    g.add_argument("--acyclic", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    ls = sub.add_parser("list", help="list builtin instances")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ParamError, ValueError) as exc:
        _emit({"error": "input", "message": str(exc)})
        return EXIT_USAGE
    except OSError as exc:
        _emit({"error": "io", "message": str(exc)})
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
