"""Monocular camera-to-body distance from the shoulder-hip pixel segment.

The apparent pixel length of the segment joining the shoulder midpoint and
the hip midpoint (the S-H length) shrinks as the subject moves away from
the camera.  A piecewise logarithmic fit maps that length to a distance in
centimeters, with one branch for large segments (near subjects) and one
for small segments (far subjects), split at 200 px.  The fit assumes a
subject of roughly 1.80 m standing upright.

Also provided is a derivative-ratio outlier test over a short S-H history.
Posture changes such as leaning or sitting change the S-H length much
faster than locomotion does, so a sudden length derivative well above the
recent average marks the frame as unusable for distance estimation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import (
    InsufficientHistoryError,
    InvalidFrameError,
    ModelDomainError,
    PixelRangeError,
)

# Diagonal of the 1280x720 depth image; upper bound for any plausible S-H length.
_IMAGE_DIAGONAL_PX = math.hypot(1280.0, 720.0)


@dataclass(frozen=True)
class LogBranch:
    """One branch of the piecewise model: distance_cm = gain * ln(px - shift) + offset."""

    gain: float    # cm per log-pixel, negative (longer segment means closer)
    shift: float   # px, vertical asymptote of the forward map
    offset: float  # cm

    def distance_cm(self, sh_px: float) -> float:
        arg = sh_px - self.shift
        if arg <= 0.0:
            raise ModelDomainError(
                f"S-H length {sh_px:.3f} px is at or below the branch asymptote "
                f"{self.shift} px"
            )
        return self.gain * math.log(arg) + self.offset

    def pixel_for(self, distance_cm: float) -> float:
        return self.shift + math.exp((distance_cm - self.offset) / self.gain)

    def sensitivity_cm_per_px(self, sh_px: float) -> float:
        """|d distance / d px| at ``sh_px``: how many cm one pixel of error maps to."""
        arg = sh_px - self.shift
        if arg <= 0.0:
            raise ModelDomainError(
                f"S-H length {sh_px:.3f} px is at or below the branch asymptote "
                f"{self.shift} px"
            )
        return abs(self.gain) / arg


@dataclass(frozen=True)
class MonocularModelParams:
    """Calibration of the piecewise log model.

    ``far`` applies below ``split_px`` (small segment, distant subject),
    ``near`` at or above it.  The two branches do not meet at the split;
    the resulting dead band of unreachable distances is reported by
    :func:`branch_gap_cm` and rejected by :func:`monocular_cb_inverse`.
    """

    far: LogBranch = LogBranch(gain=-48.03, shift=179.4, offset=401.0)
    near: LogBranch = LogBranch(gain=-240.2, shift=47.3, offset=1457.0)
    split_px: float = 200.0
    assumed_height_m: float = 1.80  # subject height the calibration assumes
    max_pixel: float = _IMAGE_DIAGONAL_PX

    def __post_init__(self):
        if not (self.far.shift < self.split_px and self.near.shift < self.split_px):
            raise ValueError(
                "both branch asymptotes must lie below the split "
                f"({self.far.shift}, {self.near.shift} vs {self.split_px})"
            )


DEFAULT_MODEL = MonocularModelParams()


@dataclass(frozen=True)
class KeypointFrame:
    """Pose keypoints reduced to the two S-H segment endpoints, in pixels."""

    timestamp: float
    shoulder_mid: Tuple[float, float]
    hip_mid: Tuple[float, float]
    valid: bool = True


@dataclass(frozen=True)
class ShOutlierConfig:
    """Tuning for the S-H derivative-ratio outlier test."""

    window: int = 10          # derivative samples in the rolling mean
    rel_threshold: float = 1.25

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if not self.rel_threshold > 1.0:
            raise ValueError(f"rel_threshold must be > 1, got {self.rel_threshold}")


def sh_pixel_distance(frame: KeypointFrame) -> float:
    """Euclidean pixel length of the shoulder-hip segment.

    Raises:
        InvalidFrameError: if the frame is flagged invalid or any
            coordinate is non-finite.
    """
    if not frame.valid:
        raise InvalidFrameError(f"keypoint frame at t={frame.timestamp} is invalid")
    coords = (*frame.shoulder_mid, *frame.hip_mid)
    if not all(math.isfinite(c) for c in coords):
        raise InvalidFrameError(
            f"keypoint frame at t={frame.timestamp} has non-finite coordinates"
        )
    dx = frame.hip_mid[0] - frame.shoulder_mid[0]
    dy = frame.hip_mid[1] - frame.shoulder_mid[1]
    return math.hypot(dx, dy)


def monocular_cb_estimate(
    sh_px: float, params: MonocularModelParams = DEFAULT_MODEL
) -> float:
    """Camera-to-body distance in centimeters for an S-H length in pixels.

    Raises:
        ValueError: if ``sh_px`` is not a positive finite number.
        ModelDomainError: if the pixel length falls outside the active
            branch's log domain, or the model output is not positive.
    """
    if not (math.isfinite(sh_px) and sh_px > 0.0):
        raise ValueError(f"sh_px must be positive and finite, got {sh_px}")
    branch = params.far if sh_px < params.split_px else params.near
    d = branch.distance_cm(sh_px)
    if d <= 0.0:
        raise ModelDomainError(
            f"S-H length {sh_px:.3f} px maps to non-positive distance {d:.3f} cm"
        )
    return d


def monocular_sensitivity(
    sh_px: float, params: MonocularModelParams = DEFAULT_MODEL
) -> float:
    """Pixel-to-distance error amplification in cm/px at an S-H length.

    Magnitude of the model slope on the branch that
    :func:`monocular_cb_estimate` would use.  Near the far branch's
    asymptote this grows without bound, which is what makes small
    pixel jitter turn into meters of distance error at long range.

    Raises:
        ValueError: if ``sh_px`` is not a positive finite number.
        ModelDomainError: if the pixel length is outside the active
            branch's log domain.
    """
    if not (math.isfinite(sh_px) and sh_px > 0.0):
        raise ValueError(f"sh_px must be positive and finite, got {sh_px}")
    branch = params.far if sh_px < params.split_px else params.near
    return branch.sensitivity_cm_per_px(sh_px)


def branch_gap_cm(params: MonocularModelParams = DEFAULT_MODEL) -> Tuple[float, float]:
    """Distance interval (low, high) in cm unreachable by either branch.

    The forward model jumps by ``high - low`` centimeters as the S-H
    length crosses the branch split, so distances strictly inside the
    interval have no pixel preimage.
    """
    low = params.near.distance_cm(params.split_px)
    high = params.far.distance_cm(params.split_px)
    return (low, high)


def monocular_cb_inverse(
    distance_cm: float, params: MonocularModelParams = DEFAULT_MODEL
) -> float:
    """S-H pixel length that the model maps to ``distance_cm``.

    Inverts the near branch for distances at or below its value at the
    split, and the far branch above that.  Distances inside the dead band
    between the branches have no preimage.

    Raises:
        ValueError: if ``distance_cm`` is not positive and finite.
        ModelDomainError: if the distance falls in the dead band.
        PixelRangeError: if the inverted length lies outside
            ``(0, params.max_pixel]``.
    """
    if not (math.isfinite(distance_cm) and distance_cm > 0.0):
        raise ValueError(f"distance must be positive and finite, got {distance_cm}")
    gap_low, gap_high = branch_gap_cm(params)
    if distance_cm <= gap_low:
        px = params.near.pixel_for(distance_cm)
    else:
        px = params.far.pixel_for(distance_cm)
        if px >= params.split_px:
            raise ModelDomainError(
                f"distance {distance_cm:.3f} cm falls in the dead band "
                f"({gap_low:.3f}, {gap_high:.3f}) cm between branches"
            )
    if not (0.0 < px <= params.max_pixel):
        raise PixelRangeError(
            f"distance {distance_cm:.3f} cm inverts to {px:.1f} px, outside "
            f"(0, {params.max_pixel:.1f}]"
        )
    return px


def derivative_ratio_outlier(
    history: Sequence[Tuple[float, float]],
    window: int,
    rel_threshold: float,
) -> bool:
    """Test whether the newest sample's derivative is an outlier.

    ``history`` holds (timestamp, value) pairs in strictly increasing
    timestamp order; the final entry is the candidate sample.  Its
    derivative against the previous sample is compared with
    ``rel_threshold`` times the mean absolute derivative of the
    ``window`` preceding sample pairs.  With fewer than ``window``
    preceding derivatives the test is in warm-up and reports False.

    Raises:
        InsufficientHistoryError: with fewer than two samples.
        ValueError: if timestamps are not strictly increasing.
    """
    n = len(history)
    if n < 2:
        raise InsufficientHistoryError(
            f"need at least 2 samples for a derivative, got {n}"
        )
    derivs = []
    for (t0, v0), (t1, v1) in zip(history, history[1:]):
        dt = t1 - t0
        if dt <= 0.0:
            raise ValueError(f"timestamps must be strictly increasing, got {t0} -> {t1}")
        derivs.append((v1 - v0) / dt)
    latest = derivs[-1]
    prior = derivs[:-1]
    if len(prior) < window:
        return False
    recent = prior[-window:]
    mean_abs = sum(abs(d) for d in recent) / len(recent)
    return abs(latest) > rel_threshold * mean_abs


def sh_outlier_check(
    history: Sequence[Tuple[float, float]],
    config: Optional[ShOutlierConfig] = None,
) -> bool:
    """True when the newest S-H length looks like a posture artifact.

    ``history`` holds (timestamp, sh_px) pairs; the last entry is the
    frame under test.  Callers own the history and should drop flagged
    samples from it so that a burst of artifacts cannot drag the rolling
    mean up and let later garbage through.
    """
    cfg = config or ShOutlierConfig()
    return derivative_ratio_outlier(history, cfg.window, cfg.rel_threshold)
