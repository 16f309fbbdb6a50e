"""Detection metrics over a score set: EER and normalized minimum DCF.

Operating points come from `sklearn.metrics.roc_curve` without dropping intermediate
thresholds, so every distinct score is a threshold (accept iff score >= threshold) and
the reject-all and accept-all points are included.
"""

from __future__ import annotations

import numpy as np
from sklearn.metrics import roc_curve

from .scoring import ScoreSet


def operating_points(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(P_miss, P_fa, thresholds) with thresholds in decreasing order."""

    false_alarm, hit, thresholds = roc_curve(
        scores.is_target.astype(int), scores.scores, drop_intermediate=False
    )
    return 1.0 - hit, false_alarm, thresholds


def eer(scores: ScoreSet) -> float:
    """Rate where P_miss crosses P_fa, interpolated linearly between adjacent points.

    Capped at 0.5: scores worse than chance report chance.
    """

    miss, false_alarm, _ = operating_points(scores)
    gap = miss - false_alarm
    crossing = int(np.argmax(gap <= 0.0))
    if crossing == 0:
        return min(float(false_alarm[0]), 0.5)
    before, after = gap[crossing - 1], gap[crossing]
    weight = before / (before - after)
    rate = false_alarm[crossing - 1] + weight * (false_alarm[crossing] - false_alarm[crossing - 1])
    return min(float(rate), 0.5)


def min_dcf(
    scores: ScoreSet,
    p_target: float = 0.05,
    c_miss: float = 1.0,
    c_fa: float = 1.0,
) -> float:
    miss, false_alarm, _ = operating_points(scores)
    costs = c_miss * p_target * miss + c_fa * (1.0 - p_target) * false_alarm
    return float(np.min(costs) / min(c_miss * p_target, c_fa * (1.0 - p_target)))
