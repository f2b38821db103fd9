"""Accuracy statistics for an estimate series against ground truth.

Errors are signed (estimate minus truth) and reported in centimeters.
``mean_abs_err_cm`` is the absolute value of the signed mean error, not
the mean of absolute errors, so it measures systematic offset; paired
with the population standard deviation it satisfies
``rmse^2 == mean_abs^2 + std^2`` exactly.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    """Per-method accuracy summary; stats are None when nothing matched."""

    method: str
    mean_abs_err_cm: Optional[float]
    rmse_cm: Optional[float]
    std_cm: Optional[float]
    n_frames: int
    n_excluded: int

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "mean_abs_err_cm": self.mean_abs_err_cm,
            "rmse_cm": self.rmse_cm,
            "std_cm": self.std_cm,
            "n_frames": self.n_frames,
            "n_excluded": self.n_excluded,
        }


def empty_report(method: str, n_truth: int) -> MetricsReport:
    """Report for a method that produced no estimates at all."""
    return MetricsReport(
        method=method,
        mean_abs_err_cm=None,
        rmse_cm=None,
        std_cm=None,
        n_frames=0,
        n_excluded=n_truth,
    )


def _nearest(sorted_ts: Sequence[float], t: float) -> int:
    i = bisect_left(sorted_ts, t)
    if i == 0:
        return 0
    if i == len(sorted_ts):
        return len(sorted_ts) - 1
    return i if sorted_ts[i] - t < t - sorted_ts[i - 1] else i - 1


def compute_metrics(
    estimates: Sequence[Tuple[float, float]],
    truth: Sequence[Tuple[float, float]],
    method: str = "",
    frame_period: Optional[float] = None,
) -> MetricsReport:
    """Associate estimates to truth frames and summarize the errors.

    Both sequences hold (timestamp, meters) pairs in increasing time
    order.  Each truth frame is paired with the nearest estimate within
    half a frame period (inferred from truth spacing when not given).
    Truth frames with no estimate in reach, and estimates that match no
    truth frame, are counted in ``n_excluded``.

    Raises:
        ValueError: on empty inputs or when nothing can be paired.
    """
    if not truth:
        raise ValueError("truth sequence is empty")
    if not estimates:
        raise ValueError("estimate sequence is empty")
    est_ts = [t for t, _ in estimates]
    if frame_period is None:
        if len(truth) > 1:
            gaps = [b[0] - a[0] for a, b in zip(truth, truth[1:])]
            frame_period = float(np.median(gaps))
        else:
            frame_period = math.inf
    tol = frame_period / 2.0

    errors_cm: List[float] = []
    matched_estimates = set()
    for t_true, v_true in truth:
        i = _nearest(est_ts, t_true)
        if abs(est_ts[i] - t_true) <= tol:
            errors_cm.append((estimates[i][1] - v_true) * 100.0)
            matched_estimates.add(i)
    if not errors_cm:
        raise ValueError("no estimate lies within half a frame period of any truth")

    n_excluded = (len(truth) - len(errors_cm)) + (len(estimates) - len(matched_estimates))
    e = np.asarray(errors_cm)
    mean_e = float(np.mean(e))
    return MetricsReport(
        method=method,
        mean_abs_err_cm=abs(mean_e),
        rmse_cm=float(np.sqrt(np.mean(e * e))),
        std_cm=float(np.std(e)),
        n_frames=len(errors_cm),
        n_excluded=n_excluded,
    )
