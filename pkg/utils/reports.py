"""
Report writers: verdict and results CSVs, and the EER_val vs EER_test scatter
"""
import logging
from typing import Dict, Sequence

import matplotlib
matplotlib.use("Agg")  # Non-interactive backend
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from core.errors import InputError
from utils.constants import CATEGORY_STYLES, FLAGGED_MARKER

logger = logging.getLogger("privacy_harness.reports")

SVG_HASH_SALT = "privacy-harness"
VERDICT_COLUMNS = [
    "scenario_label", "eval_system", "attacker_system", "category", "eer_test", "eer_val",
    "predicted_eer_val", "residual", "relative_gap", "flagged", "margin",
]


def _to_csv(frame: pd.DataFrame, path: str, **kwargs) -> None:
    try:
        frame.to_csv(path, lineterminator="\n", **kwargs)
    except OSError as error:
        raise InputError(f"cannot write {path}: {error}") from error
    logger.info(f"Wrote {path}")


def write_verdicts_csv(verdicts: Sequence, path: str) -> None:
    rows = []
    for verdict in verdicts:
        point = verdict.point
        rows.append([
            point.scenario_label, str(point.eval_system), str(point.attacker_system), point.category,
            point.eer_test, point.eer_val, point.eer_val - verdict.residual, verdict.residual,
            verdict.relative_gap if verdict.relative_gap is not None else np.nan,
            "yes" if verdict.flagged else "no", verdict.margin_used,
        ])
    frame = pd.DataFrame(rows, columns=VERDICT_COLUMNS)
    frame["relative_gap"] = frame["relative_gap"].map(lambda gap: "" if pd.isna(gap) else f"{gap:.4f}")
    _to_csv(frame, path, index=False, float_format="%.2f")


def results_table(points: Sequence) -> pd.DataFrame:
    """Rows = attacker system, columns = evaluation system, cells = EER_test."""
    if not points:
        raise InputError("results table needs at least one point")
    cells: Dict[str, Dict[str, float]] = {}
    columns = []
    for point in points:
        attacker, evaluated = str(point.attacker_system), str(point.eval_system)
        if evaluated not in columns:
            columns.append(evaluated)
        row = cells.setdefault(attacker, {})
        if evaluated in row:
            logger.warning(f"Duplicate cell ({attacker}, {evaluated}); keeping the first value")
            continue
        row[evaluated] = point.eer_test
    frame = pd.DataFrame.from_dict(cells, orient="index").reindex(columns=columns)
    frame.index.name = "attacker"
    return frame


def write_results_table(points: Sequence, path: str) -> None:
    _to_csv(results_table(points), path, float_format="%.2f", na_rep="")


def write_scatter_svg(matched: Sequence, verdicts: Sequence, line, path: str) -> None:
    """
    Scatter of EER_val against EER_test with the dashed reference line.

    Matched points use their category style; flagged candidates are drawn
    with a cross so they stay distinct without colour.
    """
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT, "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6.4, 5.2))
        try:
            seen = set()

            def draw(point, style, marker, edge):
                label = style["label"] if style["label"] not in seen else None
                seen.add(style["label"])
                ax.scatter(point.eer_test, point.eer_val, marker=marker, s=80, c=style["color"],
                           edgecolors=edge, linewidths=1.2, label=label, zorder=3)
                ax.annotate(point.scenario_label, (point.eer_test, point.eer_val),
                            textcoords="offset points", xytext=(5, 4), fontsize=7)

            for point in matched:
                style = CATEGORY_STYLES["matched"]
                draw(point, style, style["marker"], "none")
            for verdict in verdicts:
                style = CATEGORY_STYLES.get(verdict.point.category, CATEGORY_STYLES["candidate"])
                if verdict.flagged:
                    flagged_style = dict(style, label=f"{style['label']} (flagged)")
                    draw(verdict.point, flagged_style, FLAGGED_MARKER, "black")
                else:
                    draw(verdict.point, style, style["marker"], "none")

            xs = [p.eer_test for p in matched] + [v.point.eer_test for v in verdicts]
            low, high = max(0.0, min(xs) - 5.0), min(100.0, max(xs) + 5.0)
            grid = np.array([low, high])
            ax.plot(grid, line.slope * grid + line.intercept, linestyle="--", color=CATEGORY_STYLES["matched"]["color"],
                    label=f"Reference line (n={line.n_points})", zorder=2)

            ax.set_xlabel("EER_test (%)")
            ax.set_ylabel("EER_val (%)")
            ax.grid(True, alpha=0.3)
            ax.legend(fontsize=7, loc="upper left")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as error:
            raise InputError(f"cannot write {path}: {error}") from error
        finally:
            plt.close(fig)
    logger.info(f"Wrote {path}")
