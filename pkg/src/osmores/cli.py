"""Command line entry point.

    osmores simulate <scenario> [--alg ALGn] [--out DIR] [--seed N] [--cooperation MODE]
    osmores compare <scenario> --algs ALG1,ALG2,... [--out DIR] [--seed N]
    osmores validate <scenario>
    osmores synth-trace --out FILE [--peak W] [--sunrise H] [--sunset H] [--days N] [--start DATE]

``<scenario>`` is a YAML file or the name of a bundled scenario. Exit status
is 0 on success, 1 when the scenario fails validation, 2 on runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import List, Optional

from .metrics import fmt
from .scenario import ScenarioError, _parse_start, parse_scenario
from .simulation import compare, run
from .traces import TraceError, synth_clear_sky, write_trace

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(args):
    scenario = parse_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        scenario = scenario.with_seed(args.seed)
    if getattr(args, "cooperation", None):
        scenario = scenario.with_cooperation(args.cooperation)
    return scenario


def cmd_simulate(args) -> int:
    scenario = _load(args)
    if args.alg:
        scenario = scenario.with_algorithm(args.alg)
    out = Path(args.out) if args.out else Path("osmores-out") / scenario.name / scenario.algorithm
    report = run(scenario, out)
    print(f"{scenario.name} {report.algorithm}: m_self={fmt(report.m_self)} m_low={fmt(report.m_low)} "
          f"nearest_edge_ratio={fmt(report.nearest_edge_ratio)} completed={report.n_completed} "
          f"dropped={report.n_dropped} -> {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = _load(args)
    algorithms = [a.strip() for a in args.algs.split(",") if a.strip()]
    for alg in algorithms:
        scenario.with_algorithm(alg)
    out = Path(args.out) if args.out else Path("osmores-out") / scenario.name / "compare"
    reports = compare(scenario, algorithms, out)
    print(f"{'algorithm':<10} {'m_self':>9} {'m_low':>9} {'nearest':>9}")
    for r in reports:
        print(f"{r.algorithm:<10} {fmt(r.m_self):>9} {fmt(r.m_low):>9} {fmt(r.nearest_edge_ratio):>9}")
    print(f"-> {out / 'comparison.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario = parse_scenario(args.scenario)
    print(f"{scenario.name}: ok ({len(scenario.datacenters)} datacenters, {len(scenario.devices)} devices, "
          f"{len(scenario.flows)} flows, algorithm {scenario.algorithm}, {scenario.cooperation.value})")
    return EXIT_OK


def cmd_synth_trace(args) -> int:
    start = _parse_start(args.start) if args.start else datetime(2016, 1, 1)
    trace = synth_clear_sky(args.peak, args.sunrise, args.sunset, args.days, start=start,
                            sampling=args.sampling)
    write_trace(trace, args.out)
    print(f"wrote {len(trace)} hours to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osmores", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and write its report")
    p.add_argument("scenario")
    p.add_argument("--alg", help="override the scenario's algorithm (ALG1..ALG5)")
    p.add_argument("--out", help="report directory (default osmores-out/<name>/<alg>)")
    p.add_argument("--seed", type=int)
    p.add_argument("--cooperation", choices=["independent", "communicating", "central"])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several algorithms on the same scenario")
    p.add_argument("scenario")
    p.add_argument("--algs", default="ALG1,ALG2,ALG3,ALG4,ALG5")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--cooperation", choices=["independent", "communicating", "central"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check a scenario file and report every problem")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth-trace", help="write a synthetic clear-sky trace CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--peak", type=float, default=1000.0, help="W per kWp at solar noon")
    p.add_argument("--sunrise", type=float, default=6.0)
    p.add_argument("--sunset", type=float, default=18.0)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--start", help="first hour, ISO 8601 UTC (default 2016-01-01)")
    p.add_argument("--sampling", choices=["instant", "mean"], default="instant")
    p.set_defaults(func=cmd_synth_trace)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TraceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME if args.command != "synth-trace" else EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
