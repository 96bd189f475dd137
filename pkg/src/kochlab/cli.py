"""Command line entry point.

    kochlab run --config exp.yaml [--seed N] [--out DIR] [--workers N] [--suite NAME ...]
    kochlab an-cover --seed 1 --out out/
    kochlab plot out/s2_scan.csv --kind decay --out s2.svg

Exit codes: 0 all suites passed, 1 a suite failed, 2 invalid config or
input, 3 time budget exceeded.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import plotting
from .config import ExperimentConfig, load_config, parse_config
from .diophantine import cf_expand, is_diophantine_D
from .errors import ConfigError, KochLabError, MalformedInputError
from .report import to_csv
from .runner import run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

# subcommand -> suites it runs
SHORTCUTS = {
    "roof-check": ["roof_check"],
    "birkhoff-scan": ["denjoy_koksma", "dk0", "few_translates"],
    "an-cover": ["an_cover"],
    "tuple-search": ["tuple_search"],
    "orbital": ["orbital", "case1", "analytic_difference"],
    "s2-scan": ["s2_scan"],
    "s3-check": ["s3_check"],
    "s1-check": ["s1_check"],
    "clt": ["theta", "clt"],
    "variance": ["variance", "variance_scaling"],
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--suite", action="append", help="suite to run (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kochlab", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the suites named in a config")
    _common(p)
    for name, suites in SHORTCUTS.items():
        p = sub.add_parser(name, help="run " + ", ".join(suites))
        _common(p)

    p = sub.add_parser("cf", help="continued fraction table of a rotation number")
    p.add_argument("alpha", nargs="?", default="golden")
    p.add_argument("--depth", type=int, default=20)
    p.add_argument("--C", type=float, default=3.0, help="class D constant to certify")

    p = sub.add_parser("plot", help="render an SVG from a CSV or JSON artifact")
    p.add_argument("path")
    p.add_argument("--kind", required=True, choices=plotting.KINDS)
    p.add_argument("--out", required=True)
    return ap


def resolve_config(args, suites=None) -> ExperimentConfig:
    overrides = {"seed": args.seed, "output_dir": args.out, "workers": args.workers}
    if args.suite:
        overrides["suites"] = args.suite
    elif suites is not None:
        overrides["suites"] = suites
    if args.config:
        return load_config(args.config, overrides)
    data = {k: v for k, v in overrides.items() if v is not None}
    if "seed" not in data:
        raise ConfigError("a seed is required: pass --seed or --config")
    return parse_config(data)


def _cmd_cf(args) -> int:
    cf = cf_expand(args.alpha, args.depth)
    cert = is_diophantine_D(cf, args.C)
    rows = [(n, cf.a(n) if n else 0, cf.q(n)) for n in range(cf.depth + 1)]
    sys.stdout.write(to_csv(("n", "a_n", "q_n"), rows))
    sys.stderr.write(f"alpha={cf.alpha!r} class D(C={args.C:g}): {cert.passed} "
                     f"(worst ratio {cert.worst_ratio:.4g})\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "cf":
            return _cmd_cf(args)
        if args.command == "plot":
            print(plotting.plot(args.path, args.kind, args.out))
            return EXIT_OK
        cfg = resolve_config(args, SHORTCUTS.get(args.command))
    except ConfigError as exc:
        print(f"config-invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MalformedInputError as exc:
        print(f"malformed-input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KochLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outcome = run(cfg)
    for s in outcome.report["suites"]:
        status = "PASS" if s["passed"] else "FAIL"
        tail = "" if s["passed"] else f"  [{s['failing_invariant']}]"
        print(f"{status} {s['name']}: {s['anchor']}{tail}")
    if outcome.exit_code == EXIT_BUDGET:
        print(f"budget exceeded after {outcome.report['budget_exceeded_after']}", file=sys.stderr)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
