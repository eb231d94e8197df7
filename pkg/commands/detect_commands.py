"""
Detection and report commands
"""
import os

from core.errors import InputError
from services.detector import detect_report, read_points_csv
from services.suite import analyse_points, emit_suite_outputs
from utils.constants import DEFAULT_MARGIN


def _print_verdicts(verdicts):
    for verdict in verdicts:
        point = verdict.point
        gap = f"{verdict.relative_gap:.3f}" if verdict.relative_gap is not None else "-"
        status = "FLAGGED" if verdict.flagged else "ok"
        print(f"{point.scenario_label}\t{point.eer_test:.2f}\t{point.eer_val:.2f}\t"
              f"residual={verdict.residual:.2f}\tgap={gap}\t{status}")


def setup_detect_commands(harness, subparsers):
    """
    Setup detection commands

    Args:
        harness: The harness instance
        subparsers: Subparsers action of the top-level parser
    """
    detect_parser = subparsers.add_parser("detect", help="flag evaluations below the matched reference line")
    detect_parser.add_argument("--matched", required=True, help="points CSV with matched evaluations")
    detect_parser.add_argument("--candidates", required=True, help="points CSV with evaluations to assess")
    detect_parser.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="percentage points below the line")
    detect_parser.add_argument("--out-csv", required=True, help="verdict table to write")
    detect_parser.add_argument("--out-svg", required=True, help="scatter plot to write")

    def detect_command(args):
        matched = [point for point in read_points_csv(args.matched) if point.category == "matched"]
        candidates = read_points_csv(args.candidates)
        report = detect_report(matched, candidates, args.margin, args.out_csv, args.out_svg)
        print(f"line: EER_val = {report.line.slope:.4f} * EER_test + {report.line.intercept:.4f} "
              f"({report.line.n_points} matched points)")
        _print_verdicts(report.verdicts)
        harness.logger.info(f"{len(report.flagged)} of {len(report.verdicts)} candidates flagged")

    detect_parser.set_defaults(handler=detect_command)

    report_parser = subparsers.add_parser("report", help="rebuild tables and plot from a points CSV")
    report_parser.add_argument("--points", required=True, help="points CSV (as written by run-suite)")
    report_parser.add_argument("--out-dir", required=True)
    report_parser.add_argument("--margin", type=float, default=DEFAULT_MARGIN)

    def report_command(args):
        if args.margin < 0:
            raise InputError(f"margin must be >= 0, got {args.margin}")
        result = analyse_points(tuple(read_points_csv(args.points)), args.margin)
        for path in emit_suite_outputs(result, args.out_dir):
            print(os.path.normpath(path))
        if result.fit_error:
            print(f"no reference line: {result.fit_error}")

    report_parser.set_defaults(handler=report_command)
