"""Command line entry point: run, serve, replay."""

from __future__ import annotations

import argparse
import sys

from ..world import ParseError
from .events import LogCorrupt


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cisru-sim",
        description="Deterministic multi-rover ISRU mission simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario headless")
    run_p.add_argument("--scenario", required=True, help="scenario JSON file")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--ticks", type=int, default=None, help="tick budget")
    run_p.add_argument("--log", default=None, help="event log output path")

    serve_p = sub.add_parser("serve", help="serve a live session for consoles")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--port", type=int, required=True)
    serve_p.add_argument("--rate", type=float, default=10.0, help="ticks per second")
    serve_p.add_argument("--ticks", type=int, default=None, help="stop after N ticks")
    serve_p.add_argument("--log", default=None)

    replay_p = sub.add_parser("replay", help="verify a log reproduces byte-exactly")
    replay_p.add_argument("--log", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            from .runner import run_headless

            status, log = run_headless(args.scenario, seed=args.seed,
                                       max_ticks=args.ticks, log_path=args.log)
            terminal = "all goals terminal" if status == 0 else "goals incomplete"
            print(f"run finished: {len(log.lines)} records, {terminal}")
            return status
        if args.command == "serve":
            from .server import serve

            return serve(args.scenario, args.port, rate=args.rate,
                         max_ticks=args.ticks, log_path=args.log)
        if args.command == "replay":
            from .runner import replay

            report = replay(args.log)
            print(report.summary())
            return 0 if report.identical else 1
    except ParseError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return 2
    except LogCorrupt as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
