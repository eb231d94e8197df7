"""
Mismatch detection from (EER_test, EER_val) pairs.

A reference line is fitted over matched evaluations; candidates whose
EER_val falls below it by more than a margin are flagged.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import FormatError, InputError, InsufficientDataError
from core.types import SystemId
from utils.constants import CATEGORIES, DEFAULT_MARGIN

logger = logging.getLogger("privacy_harness.detector")

POINT_COLUMNS = ["scenario_label", "eval_system", "attacker_system", "eer_test", "eer_val"]


@dataclass(frozen=True)
class EvaluationPoint:
    """EER pair of one attacker evaluated on one system's data."""
    eer_test: float
    eer_val: float
    eval_system: SystemId
    attacker_system: SystemId
    scenario_label: str = ""
    category: str = "candidate"

    def __post_init__(self):
        for name in ("eer_test", "eer_val"):
            value = float(getattr(self, name))
            if not (0.0 <= value <= 100.0) or math.isnan(value):
                raise InputError(f"{self.scenario_label or 'point'}: {name} {value} outside [0, 100]")
            object.__setattr__(self, name, value)
        if self.category not in CATEGORIES + ("candidate",):
            raise InputError(f"unknown scenario category {self.category!r}")
        if not self.scenario_label:
            object.__setattr__(self, "scenario_label", f"{self.eval_system}|{self.attacker_system}")

    @property
    def is_matched(self) -> bool:
        return self.eval_system == self.attacker_system


@dataclass(frozen=True)
class ReferenceLine:
    slope: float
    intercept: float
    n_points: int

    def predict(self, eer_test: float) -> float:
        return self.slope * eer_test + self.intercept


@dataclass(frozen=True)
class Verdict:
    """Position of one point relative to the reference line."""
    point: EvaluationPoint
    residual: float
    relative_gap: Optional[float]
    flagged: bool
    margin_used: float


@dataclass(frozen=True)
class DetectionReport:
    line: ReferenceLine
    matched: Tuple[EvaluationPoint, ...]
    verdicts: Tuple[Verdict, ...]
    artifacts: Tuple[str, ...] = field(default=())

    @property
    def flagged(self) -> List[Verdict]:
        return [verdict for verdict in self.verdicts if verdict.flagged]


def fit_reference_line(points: Sequence[EvaluationPoint]) -> ReferenceLine:
    """
    Ordinary least squares of EER_val on EER_test over matched points.

    Raises:
        InsufficientDataError: Fewer than 2 points or a single distinct EER_test
        InputError: If a point is not matched (it is named in the message)
    """
    if len(points) < 2:
        raise InsufficientDataError(f"insufficient matched points: need >= 2, got {len(points)}")
    for point in points:
        if not point.is_matched:
            raise InputError(f"reference line needs matched points; {point.scenario_label} is not matched")
    x = np.array([point.eer_test for point in points], dtype=np.float64)
    y = np.array([point.eer_val for point in points], dtype=np.float64)
    if np.ptp(x) == 0.0:
        raise InsufficientDataError("matched points need at least 2 distinct EER_test values")

    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    line = ReferenceLine(float(slope), float(intercept), len(points))
    logger.info(f"Reference line over {len(points)} matched points: EER_val = {slope:.4f} * EER_test + {intercept:.4f}")
    return line


def assess(point: EvaluationPoint, line: ReferenceLine, margin: float = DEFAULT_MARGIN) -> Verdict:
    """Residual against ``line``; flagged when it is below ``-margin``."""
    if margin < 0:
        raise InputError(f"margin must be >= 0, got {margin}")
    residual = point.eer_val - line.predict(point.eer_test)
    relative_gap = (point.eer_test - point.eer_val) / point.eer_test if point.eer_test > 0 else None
    return Verdict(point, residual, relative_gap, residual < -margin, float(margin))


def detect_report(matched: Sequence[EvaluationPoint], candidates: Sequence[EvaluationPoint],
                  margin: float = DEFAULT_MARGIN, out_csv: Optional[str] = None,
                  out_svg: Optional[str] = None) -> DetectionReport:
    """
    Fit on ``matched``, assess every candidate and optionally write the
    verdict CSV and the SVG scatter.
    """
    from utils.reports import write_scatter_svg, write_verdicts_csv

    line = fit_reference_line(matched)
    verdicts = tuple(assess(point, line, margin) for point in candidates)
    for verdict in verdicts:
        if verdict.flagged:
            logger.info(f"Flagged {verdict.point.scenario_label}: residual {verdict.residual:.2f} pp")

    artifacts = []
    if out_csv:
        write_verdicts_csv(verdicts, out_csv)
        artifacts.append(out_csv)
    if out_svg:
        write_scatter_svg(tuple(matched), verdicts, line, out_svg)
        artifacts.append(out_svg)
    return DetectionReport(line, tuple(matched), verdicts, tuple(artifacts))


# Points CSV

def points_frame(points: Sequence[EvaluationPoint], with_category: bool = False) -> pd.DataFrame:
    frame = pd.DataFrame(
        [[p.scenario_label, str(p.eval_system), str(p.attacker_system), p.eer_test, p.eer_val] for p in points],
        columns=POINT_COLUMNS,
    )
    if with_category:
        frame["category"] = [p.category for p in points]
    return frame


def write_points_csv(points: Sequence[EvaluationPoint], path: str, with_category: bool = False) -> None:
    """
    Bridge format: ``scenario_label,eval_system,attacker_system,eer_test,eer_val``.

    Suite output appends a ``category`` column so hidden-mismatch points with
    equal system ids are not mistaken for matched ones when read back.
    """
    try:
        points_frame(points, with_category).to_csv(path, index=False, float_format="%.2f", lineterminator="\n")
    except OSError as error:
        raise InputError(f"cannot write {path}: {error}") from error


def read_points_csv(path: str, category: Optional[str] = None) -> List[EvaluationPoint]:
    """
    Parse a points CSV, e.g. published EER pairs typed in by hand.

    The category comes from ``category`` when given, else from an optional
    ``category`` column, else ``matched`` for equal system ids.
    """
    try:
        frame = pd.read_csv(path, dtype={"scenario_label": str, "eval_system": str, "attacker_system": str})
    except FileNotFoundError as error:
        raise InputError(f"cannot read {path}: {error}") from error
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise FormatError(f"not a points CSV ({error})", path) from error

    missing = [column for column in POINT_COLUMNS if column not in frame.columns]
    if missing:
        raise FormatError(f"missing column(s) {', '.join(missing)}", path, 1)

    points = []
    for index, row in frame.iterrows():
        line_number = int(index) + 2
        try:
            eer_test, eer_val = float(row["eer_test"]), float(row["eer_val"])
        except (TypeError, ValueError) as error:
            raise FormatError("EER values must be numbers", path, line_number) from error
        eval_system = SystemId.parse(str(row["eval_system"]))
        attacker_system = SystemId.parse(str(row["attacker_system"]))
        label = row["scenario_label"] if isinstance(row["scenario_label"], str) else ""
        kind = category
        if kind is None and "category" in frame.columns and isinstance(row["category"], str):
            kind = row["category"]
        if kind is None:
            kind = "matched" if eval_system == attacker_system else "candidate"
        try:
            points.append(EvaluationPoint(eer_test, eer_val, eval_system, attacker_system, label, kind))
        except InputError as error:
            raise FormatError(str(error), path, line_number) from error
    return points


def published_reference_points() -> Tuple[List[EvaluationPoint], List[EvaluationPoint]]:
    """
    Published challenge-baseline pairs quoted for the detector.

    Returns ``(matched, candidates)``: the matched B3 evaluation (27, 11)
    and the full-mismatch B3-data/B4-attacker evaluation (44, 10). One matched
    point cannot define a line; callers add further matched references.
    """
    matched = [EvaluationPoint(27.0, 11.0, SystemId("B3"), SystemId("B3"), "(B3,B3)", "matched")]
    candidates = [EvaluationPoint(44.0, 10.0, SystemId("B3"), SystemId("B4"), "(B3,B4)", "full")]
    return matched, candidates
