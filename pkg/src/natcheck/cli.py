"""Command-line interface.

Subcommands:

    check       evaluate a formula on a model against a predicate
    simulate    unroll an auction profile; CSV trace plus figure
    gsp-build   generate the auction model (and strategy bundles) as text
    gsp-verify  run a named auction check
    fixtures    list or export the bundled expressivity models

Exit codes: 0 the predicate/check holds, 1 it does not, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

from .checker import IR, IR_RECALL, check
from .errors import NatcheckError
from .fixtures import FIXTURE_NAMES, load_fixture
from .gsp import build_gsp, build_profile, load_auction_spec, simulate
from .gsp_checks import CHECKS, run_check
from .strategies import parse_pool, parse_strategies, serialize_strategies
from .wcgs import load_model, serialize_model


def _load_any_model(args):
    if getattr(args, "fixture", None):
        return load_fixture(args.fixture)
    if getattr(args, "model", None):
        return load_model(args.model)
    raise NatcheckError("pass --model <path> or --fixture <name>")


def _read_formula(args) -> str:
    if args.formula_file:
        with open(args.formula_file, encoding="utf-8") as fh:
            return fh.read().strip()
    if args.formula:
        return args.formula
    raise NatcheckError("pass --formula <text> or --formula-file <path>")


def cmd_check(args) -> int:
    m = _load_any_model(args)
    formula = _read_formula(args)
    pool = None
    if args.pool:
        with open(args.pool, encoding="utf-8") as fh:
            pool = parse_pool(fh.read(), lib=m.lib, source=args.pool)
    registry = {}
    if args.strategies:
        with open(args.strategies, encoding="utf-8") as fh:
            registry = parse_strategies(fh.read(), lib=m.lib, source=args.strategies)
    report = check(
        m, formula,
        at=args.state if args.state else "init",
        predicate=args.predicate,
        semantics=args.semantics,
        pool=pool,
        registry=registry,
        promote=args.promote,
        pool_name=args.pool or "<none>",
    )
    if args.format == "json":
        print(report.to_json())
    else:
        print(f"value     : {report.to_dict()['value']}")
        print(f"predicate : {report.predicate}")
        print(f"holds     : {report.holds}")
        print(f"semantics : {report.semantics}")
        print(f"state     : {report.state}")
        if report.flags:
            print(f"flags     : {', '.join(report.flags)}")
        if report.witness:
            print("witness   :")
            for line in report.witness.splitlines():
                print("  " + line)
        print(f"stats     : {report.states_visited} states, "
              f"{report.strategies_enumerated} strategies, "
              f"{report.wall_time_s:.3f} s")
    return 0 if report.holds else 1


def cmd_simulate(args) -> int:
    spec = load_auction_spec(args.spec)
    if args.vcg_convention:
        spec = _replace(spec, vcg_convention=args.vcg_convention)
    if args.bid_cases:
        spec = _replace(spec, bid_cases=args.bid_cases)
    game = build_gsp(spec)
    profile = build_profile(game, args.profile)
    start = args.state if args.state else None
    trace = simulate(game, profile, rounds=args.rounds, start=start)

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=trace.header())
    writer.writeheader()
    for row in trace.rows():
        writer.writerow(row)
    text = buf.getvalue()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if not args.no_plot:
            from .plotting import render_trace_figure

            fig_path = os.path.splitext(args.output)[0] + ".png"
            render_trace_figure(trace, fig_path, title=f"{args.profile} on {os.path.basename(args.spec)}")
            print(f"wrote {args.output} and {fig_path}", file=sys.stderr)
        else:
            print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gsp_build(args) -> int:
    spec = load_auction_spec(args.spec)
    game = build_gsp(spec)
    text = serialize_model(game.model)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.output} ({len(game.model.states)} states)", file=sys.stderr)
    else:
        sys.stdout.write(text)
    if args.strategies_out:
        bundle = []
        for label in ("bb", "rbb", "kbb", "bbr"):
            bundle.extend(build_profile(game, label).values())
        with open(args.strategies_out, "w", encoding="utf-8") as fh:
            fh.write(serialize_strategies(bundle))
        print(f"wrote {args.strategies_out}", file=sys.stderr)
    return 0


def cmd_gsp_verify(args) -> int:
    spec = load_auction_spec(args.spec)
    if args.vcg_convention:
        spec = _replace(spec, vcg_convention=args.vcg_convention)
    if args.bid_cases:
        spec = _replace(spec, bid_cases=args.bid_cases)
    game = build_gsp(spec)
    outcome = run_check(game, args.check)
    if args.format == "json":
        print(json.dumps(outcome.to_dict(), indent=2, sort_keys=True))
    else:
        status = "PASS" if outcome.passed else "FAIL"
        print(f"[{status}] {outcome.name} ({outcome.wall_time_s:.2f} s)")
        for key, value in outcome.details.items():
            print(f"  {key}: {value}")
        for v in outcome.violations[:10]:
            print(f"  violation: {v}")
        if len(outcome.violations) > 10:
            print(f"  ... and {len(outcome.violations) - 10} more")
    if args.output and outcome.witness_trace is not None:
        os.makedirs(args.output, exist_ok=True)
        csv_path = os.path.join(args.output, f"{outcome.name}-witness.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=outcome.witness_trace.header())
            writer.writeheader()
            for row in outcome.witness_trace.rows():
                writer.writerow(row)
        from .plotting import render_trace_figure

        fig_path = os.path.join(args.output, f"{outcome.name}-witness.png")
        render_trace_figure(outcome.witness_trace, fig_path, title=f"{outcome.name} witness")
        print(f"witness trace: {csv_path}, {fig_path}", file=sys.stderr)
    return 0 if outcome.passed else 1


def cmd_fixtures(args) -> int:
    if not args.name:
        for name in FIXTURE_NAMES:
            print(name)
        return 0
    model = load_fixture(args.name)
    text = serialize_model(model)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.output}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _replace(spec, **kw):
    import dataclasses

    return dataclasses.replace(spec, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="natcheck",
        description="Quantitative verification of natural strategies on weighted games",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate a formula against a predicate")
    p.add_argument("--model", help="model file")
    p.add_argument("--fixture", choices=FIXTURE_NAMES, help="bundled model")
    p.add_argument("--formula", help="formula text")
    p.add_argument("--formula-file", help="file with the formula")
    p.add_argument("--pool", help="guard pool file (needed for quantifiers)")
    p.add_argument("--strategies", help="strategy bundle for @name references")
    p.add_argument("--semantics", choices=(IR, IR_RECALL), default=IR)
    p.add_argument("--state", help="state name (default: minimum over initial states)")
    p.add_argument("--init", action="store_true", help="evaluate at initial states (default)")
    p.add_argument("--predicate", default="=1", help="e.g. '=1', '>= 1/2', 'in [-1,0]'")
    p.add_argument("--promote", action="store_true",
                   help="embed memoryless @strategies under recall semantics")
    p.add_argument("--format", choices=("json", "plain"), default="plain")
    p.add_argument("--jobs", type=int, default=1, help="reserved; evaluation is deterministic")
    p.add_argument("--seed", type=int, default=0, help="seed echoed into reports")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("simulate", help="unroll an auction profile to CSV (+figure)")
    p.add_argument("--spec", required=True, help="auction spec file")
    p.add_argument("--profile", default="rbb",
                   help="bb | rbb | kbb | bbr | constant:<bid>")
    p.add_argument("--rounds", type=int, default=30)
    p.add_argument("--state", help="start state (default: first initial state)")
    p.add_argument("--output", help="CSV path; a PNG is written alongside")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--vcg-convention", choices=("per-click", "total"))
    p.add_argument("--bid-cases", choices=("swapped", "as-printed"))
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("gsp-build", help="emit the auction model as a model file")
    p.add_argument("--spec", required=True)
    p.add_argument("--output", help="model file path (default: stdout)")
    p.add_argument("--strategies-out", help="also write the bidding strategies bundle")
    p.set_defaults(fn=cmd_gsp_build)

    p = sub.add_parser("gsp-verify", help="run a named auction check")
    p.add_argument("--spec", required=True)
    p.add_argument("--check", required=True, choices=sorted(CHECKS))
    p.add_argument("--format", choices=("json", "plain"), default="plain")
    p.add_argument("--output", help="directory for witness traces/figures")
    p.add_argument("--vcg-convention", choices=("per-click", "total"))
    p.add_argument("--bid-cases", choices=("swapped", "as-printed"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gsp_verify)

    p = sub.add_parser("fixtures", help="list or export bundled models")
    p.add_argument("--name", choices=FIXTURE_NAMES)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except NatcheckError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
