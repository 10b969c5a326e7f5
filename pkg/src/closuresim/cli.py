"""Command line: run, check, export-dot, fixtures.

Exit codes: 0 ok, 1 property violation, 2 config or IO error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ExperimentConfig
from .dot import export_dot
from .fixtures import FIXTURES
from .harness import run
from .properties import PROPERTIES, check_properties
from .trace import ExecutionTrace

OK, VIOLATION, USAGE = 0, 1, 2


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config).override(
        seeds=args.seeds, closure=args.closure, out_dir=args.out)
    sweep = run(config, write_traces=not args.no_traces,
                validity_tail=args.validity_tail, agreement_slack=args.agreement_slack)
    s = sweep.summary()
    for layer in ("base", "closure"):
        tp = s[layer]["throughput"]
        print(f"{layer:8s} throughput {tp['mean']:.4f} "
              f"[{tp['ci_low']:.4f}, {tp['ci_high']:.4f}] blocks/round")
    print(f"sign pattern {s['throughput_sign_pattern']}")
    print(f"reports in {config.out_dir}")
    return OK if sweep.ok else VIOLATION


def _cmd_check(args) -> int:
    status = OK
    for path in args.traces:
        trace = ExecutionTrace.read(path)
        rep = check_properties(trace, validity_tail=args.validity_tail,
                               agreement_slack=args.agreement_slack)
        counts = rep.counts()
        for prop in PROPERTIES:
            verdict = "pass" if counts[prop] == 0 else f"FAIL ({counts[prop]})"
            print(f"{path}\t{prop}\t{verdict}")
        if not rep.ok:
            status = VIOLATION
    return status


def _cmd_export_dot(args) -> int:
    trace = ExecutionTrace.read(args.trace)
    text = export_dot(trace, args.round, args.observer)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return OK


def _cmd_fixtures(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in FIXTURES.items():
        for mode in ("off", "closure"):
            s = make(mode)
            s.trace.write(out / f"{name}_{mode}.jsonl")
            last = s.trace.rounds
            (out / f"{name}_{mode}.dot").write_text(export_dot(s.trace, last, 0))
    print(f"fixtures in {out}")
    return OK


def _check_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--validity-tail", type=int, default=50,
                   help="transactions broadcast this close to the end are exempt")
    p.add_argument("--agreement-slack", type=int, default=2,
                   help="rounds a delivery may take to reach every honest process")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="closuresim", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="paired base/closure sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", help="a..b (inclusive) or a,b,c")
    p.add_argument("--closure", choices=["off", "closure", "greedy"])
    p.add_argument("--out", help="output directory (overrides out_dir)")
    p.add_argument("--no-traces", action="store_true", help="reports only")
    _check_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("check", help="property checks over trace files")
    p.add_argument("traces", nargs="+")
    _check_flags(p)
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("export-dot", help="observer view at a round as DOT")
    p.add_argument("trace")
    p.add_argument("--round", type=int, required=True)
    p.add_argument("--observer", type=int, required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=_cmd_export_dot)

    p = sub.add_parser("fixtures", help="write the scripted traces")
    p.add_argument("--out", default="fixtures")
    p.set_defaults(func=_cmd_fixtures)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    # InvalidConfig, MalformedTrace and UnknownRound are ValueErrors, IoFailure an OSError
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
