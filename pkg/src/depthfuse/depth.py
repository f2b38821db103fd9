"""Depth-image sampling along the shoulder-hip segment.

A depth frame stores one distance per pixel in meters, with 0.0 meaning
the sensor got no return for that pixel.  The camera-to-body measurement
is the mean depth over the rasterized S-H segment, ignoring no-return
pixels.  Segment lengths far outside the usual 50..350 px band suggest a
mis-detected pose, so such samples carry a flag rather than being
silently trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import NoValidPixelsError, OutOfBoundsError
from .monocular import KeypointFrame, sh_pixel_distance

# Soft plausibility band for the number of pixels on an S-H segment.
PIXEL_ENVELOPE = (50, 350)


@dataclass(frozen=True)
class DepthFrame:
    """Row-major depth image, meters per pixel, 0.0 for no return."""

    width: int
    height: int
    depth: np.ndarray = field(repr=False)
    timestamp: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"empty image: {self.width}x{self.height}")
        arr = np.asarray(self.depth, dtype=float)
        if arr.size != self.width * self.height:
            raise ValueError(
                f"depth buffer has {arr.size} values, expected "
                f"{self.width * self.height}"
            )
        arr = arr.reshape(self.height, self.width)
        if not np.all(np.isfinite(arr)):
            raise ValueError("depth buffer contains non-finite values")
        if np.any(arr < 0.0):
            raise ValueError("depth values must be >= 0")
        object.__setattr__(self, "depth", arr)

    def at(self, x: int, y: int) -> float:
        return float(self.depth[y, x])


@dataclass(frozen=True)
class DepthLineSample:
    """Aggregate of depth returns along one rasterized S-H segment."""

    timestamp: float
    pixel_count: int
    valid_count: int
    mean_depth: float          # meters, over pixels with a return
    outside_envelope: bool = False


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def rasterize_line(
    a: Tuple[float, float],
    b: Tuple[float, float],
    width: int = 1280,
    height: int = 720,
) -> List[Tuple[int, int]]:
    """8-connected integer pixel chain from ``a`` to ``b``, endpoints included.

    Endpoints are rounded to the nearest pixel (half-up).  The result is
    ordered from ``a`` to ``b`` and free of duplicates; a degenerate
    segment yields a single pixel.

    Raises:
        OutOfBoundsError: if either rounded endpoint is outside the image.
    """
    x0, y0 = _round_half_up(a[0]), _round_half_up(a[1])
    x1, y1 = _round_half_up(b[0]), _round_half_up(b[1])
    for px, py in ((x0, y0), (x1, y1)):
        if not (0 <= px < width and 0 <= py < height):
            raise OutOfBoundsError(
                f"endpoint ({px}, {py}) outside {width}x{height} image"
            )

    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    pixels = []
    x, y = x0, y0
    while True:
        pixels.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return pixels


def extract_cb_measurement(
    frame: DepthFrame,
    keypoints: KeypointFrame,
) -> DepthLineSample:
    """Mean depth along the S-H segment of ``keypoints`` within ``frame``.

    Pixels with no return (0.0) are excluded from the mean but still
    count toward ``pixel_count``.  ``outside_envelope`` is set when the
    segment length in pixels falls outside ``PIXEL_ENVELOPE``.

    Raises:
        InvalidFrameError: via S-H length computation on a bad frame.
        OutOfBoundsError: if the segment leaves the image.
        NoValidPixelsError: if every pixel on the segment is a no-return.
    """
    sh_pixel_distance(keypoints)  # validates the frame
    pixels = rasterize_line(
        keypoints.shoulder_mid, keypoints.hip_mid, frame.width, frame.height
    )
    values = [frame.at(x, y) for x, y in pixels]
    valid = [v for v in values if v > 0.0]
    if not valid:
        raise NoValidPixelsError(
            f"no depth returns along the {len(pixels)}-pixel segment at "
            f"t={keypoints.timestamp}"
        )
    lo, hi = PIXEL_ENVELOPE
    return DepthLineSample(
        timestamp=keypoints.timestamp,
        pixel_count=len(pixels),
        valid_count=len(valid),
        mean_depth=float(sum(valid) / len(valid)),
        outside_envelope=not (lo <= len(pixels) <= hi),
    )
