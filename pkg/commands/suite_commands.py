"""
Scenario suite commands
"""
import os

from config import load_suite_config
from core.errors import InputError


def _parse_overrides(items):
    overrides = {}
    for item in items or ():
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise InputError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def setup_suite_commands(harness, subparsers):
    """
    Setup suite commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    parser = subparsers.add_parser("run-suite", help="run a matched/mismatched scenario suite end to end")
    parser.add_argument("--config", required=True, help="suite config file (see docs/config.md)")
    parser.add_argument("--out-dir", required=True, help="directory for results, points, verdicts and scatter")
    parser.add_argument("--seed", type=int, help="master seed (overrides suite.seed)")
    parser.add_argument("--margin", type=float, help="detector margin (overrides detector.margin)")
    parser.add_argument("--workers", type=int, help="pairing threads (overrides HARNESS_WORKERS)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")

    def run_suite_command(args):
        from services.suite import run_scenario_suite

        overrides = _parse_overrides(args.set)
        if args.seed is not None:
            overrides["suite.seed"] = str(args.seed)
        if args.margin is not None:
            overrides["detector.margin"] = str(args.margin)
        config = load_suite_config(args.config, overrides, {"suite.seed": str(harness.config.SEED)})
        workers = args.workers if args.workers is not None else harness.config.WORKERS
        if workers < 1:
            raise InputError(f"--workers must be >= 1, got {workers}")

        result = run_scenario_suite(config, args.out_dir, workers)
        for path in result.artifacts:
            print(os.path.normpath(path))
        if result.fit_error:
            print(f"no reference line: {result.fit_error}")
        else:
            flagged = [v.point.scenario_label for v in result.verdicts if v.flagged]
            print(f"flagged {len(flagged)} of {len(result.verdicts)} candidates: {' '.join(flagged) or '-'}")

    parser.set_defaults(handler=run_suite_command)
