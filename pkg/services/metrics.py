"""
Equal error rate computation
"""
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import roc_curve

from core.errors import InputError, InsufficientDataError
from core.types import ScoreSet

logger = logging.getLogger("privacy_harness.metrics")

EER_DECIMALS = 2


@dataclass(frozen=True)
class Eer:
    """Equal error rate in percent."""
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 100.0):
            raise InputError(f"EER must lie in [0, 100], got {self.value}")

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return f"{self.value:.{EER_DECIMALS}f}"


def _split_scores(scores: ScoreSet):
    targets = scores.target_scores()
    nontargets = scores.nontarget_scores()
    if targets.size == 0 or nontargets.size == 0:
        raise InsufficientDataError(
            f"EER needs at least one target and one nontarget score "
            f"(got {targets.size} target, {nontargets.size} nontarget)"
        )
    if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(nontargets))):
        raise InputError("EER scores must be finite")
    return targets, nontargets


def operating_points(scores: ScoreSet):
    """
    False acceptance and false rejection rates at every distinct score.

    A trial is accepted when ``score >= threshold``. The first point is the
    threshold +inf (nothing accepted), the last is the lowest distinct score
    (everything accepted), which also covers the -inf end.

    Returns:
        (far, frr) arrays ordered by decreasing threshold
    """
    targets, nontargets = _split_scores(scores)
    values = np.concatenate([targets, nontargets])
    labels = np.concatenate([np.ones(targets.size, dtype=int), np.zeros(nontargets.size, dtype=int)])
    far, tpr, _ = roc_curve(labels, values, pos_label=1, drop_intermediate=False)
    frr = 1.0 - tpr
    return far, frr


def compute_eer(scores: ScoreSet) -> Eer:
    """
    Equal error rate where the piecewise-linear FAR and FRR curves cross.

    Args:
        scores: Scored trials, higher meaning "same speaker"

    Returns:
        Eer in percent

    Raises:
        InsufficientDataError: If either class is missing
        InputError: If a score is not finite
    """
    far, frr = operating_points(scores)
    gap = frr - far
    # gap falls monotonically from +1 (threshold +inf) to -1 (all accepted)
    crossing = int(np.argmax(gap <= 0.0))
    if gap[crossing] == 0.0 or crossing == 0:
        rate = far[crossing]
    else:
        left, right = crossing - 1, crossing
        fraction = gap[left] / (gap[left] - gap[right])
        rate = far[left] + fraction * (far[right] - far[left])
    value = float(np.clip(100.0 * rate, 0.0, 100.0))
    logger.debug(f"EER {value:.4f}% over {len(scores)} trials")
    return Eer(value)


def eer_bruteforce_oracle(scores: ScoreSet) -> Eer:
    """
    Reference EER from an exhaustive threshold sweep.

    Thresholds are the midpoints between adjacent distinct scores plus +/-inf.
    Returns (FAR + FRR) / 2 at the threshold minimising |FAR - FRR|, ties
    going to the smaller max(FAR, FRR).
    """
    targets, nontargets = _split_scores(scores)
    distinct = np.unique(np.concatenate([targets, nontargets]))
    thresholds = np.concatenate([[-np.inf], (distinct[:-1] + distinct[1:]) / 2.0, [np.inf]])

    thresholds = thresholds[:, np.newaxis]
    frr = np.mean(targets[np.newaxis, :] < thresholds, axis=1)
    far = np.mean(nontargets[np.newaxis, :] >= thresholds, axis=1)

    gap = np.abs(far - frr)
    worst = np.maximum(far, frr)
    best = np.lexsort((worst, gap))[0]
    return Eer(float(100.0 * (far[best] + frr[best]) / 2.0))
