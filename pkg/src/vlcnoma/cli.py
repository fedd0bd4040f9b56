"""Command line entry point: ``vlcnoma simulate <scenario> ...``."""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import __version__
from .config import load_scenario
from .exceptions import (EnumerationCapError, NoCoverageError, ScenarioParseError, ScenarioValidationError,
                         VLCError)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NO_COVERAGE = 5

log = logging.getLogger("vlcnoma")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlcnoma", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="trace channels, allocate users and write CSV reports")
    sim.add_argument("scenario", help="scenario file, or a bundled name (paper_scenario, paper_calibrated)")
    sim.add_argument("--receiver", choices=["adr", "wide", "compare", "per-user"])
    sim.add_argument("--noma-mode", choices=["literal", "sic"])
    sim.add_argument("--objective", choices=["sum-sinr", "sum-rate"])
    sim.add_argument("--orders", type=int, choices=[0, 1, 2], help="highest reflection order traced")
    sim.add_argument("--inter-ap", action="store_true", default=None,
                     help="count other access points as co-channel interference")
    sim.add_argument("--grid", type=float, metavar="STEP_M", help="also sweep a roaming user over a grid")
    sim.add_argument("--dump-ir", metavar="DIR", help="write every impulse response as CSV into DIR")
    sim.add_argument("--out", metavar="DIR", help="output directory (default from scenario)")
    sim.add_argument("--threads", type=_positive_int, default=1)
    sim.add_argument("--fixed-assignment", metavar="FILE", help="YAML map of user id to AP id; skips the search")
    sim.add_argument("-v", "--verbose", action="store_true")

    show = sub.add_parser("config", help="print the fully-defaulted scenario")
    show.add_argument("scenario")
    return parser


def _print_report(bundle) -> None:
    for kind, res in bundle.runs.items():
        rep = res.report
        tag = "" if rep.optimal else " (not exhaustive)"
        print(f"[{kind}] assignment {rep.assignment.mapping()}{tag}")
        print(f"  {'user':<6}{'AP':<6}{'branch':>6}{'gain':>12}{'bw MHz':>10}{'SINR dB':>10}{'rate Mb/s':>11}")
        for l in rep.links:
            print(f"  {l.user_id:<6}{l.ap_id:<6}{l.branch:>6}{l.dc_gain:>12.4e}{l.bandwidth / 1e6:>10.1f}"
                  f"{l.sinr_db:>10.2f}{l.rate / 1e6:>11.2f}")
    if bundle.compare:
        imp = bundle.improvements()
        print("ADR vs wide-FOV data rate: " + ", ".join(f"{u} {v:+.1f}%" for u, v in imp.items())
              + f"; average {bundle.average_improvement():+.1f}%")


def _simulate(args) -> int:
    from .runner import load_fixed_assignment, run_scenario, sweep_grid, write_outputs

    cfg = load_scenario(args.scenario)
    fixed = load_fixed_assignment(args.fixed_assignment, cfg) if args.fixed_assignment else None
    bundle = run_scenario(cfg, args.receiver, noma_mode=args.noma_mode, max_order=args.orders,
                          objective=args.objective, inter_ap=args.inter_ap, fixed_assignment=fixed,
                          threads=args.threads, keep_responses=args.dump_ir is not None)
    grid = None
    if args.grid is not None:
        grid = sweep_grid(cfg, args.receiver, args.grid, noma_mode=args.noma_mode, max_order=args.orders,
                          threads=args.threads)
    written = write_outputs(bundle, args.out or cfg.run.output_dir, grid, args.dump_ir)
    _print_report(bundle)
    for name, path in written.items():
        log.info("wrote %s: %s", name, path)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "config":
            sys.stdout.write(load_scenario(args.scenario).to_yaml())
            return EXIT_OK
        return _simulate(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoCoverageError as exc:
        print(f"no coverage: {exc}", file=sys.stderr)
        return EXIT_NO_COVERAGE
    except EnumerationCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except VLCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
