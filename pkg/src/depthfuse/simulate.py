"""Synthetic walking scenarios with sensor-accurate noise and dropouts.

Three trajectory families exercise the estimator: stepped forward-back
motion with pauses, a smooth sinusoidal sweep in range, and a lateral
sweep at fixed range that pushes the subject toward the field-of-view
edges.  No images are rendered; keypoints are placed analytically and the
depth channel is synthesized at line-sample level.

Keypoint placement inverts the monocular distance model, so with noise
disabled the model recovers the true distance exactly (distances inside
the model's dead band snap to the nearest representable value).  Depth
readings get a flat noise floor inside the sensor's comfortable range,
exponentially growing noise plus a proportional overshoot bias beyond
it, and total dropout past the maximum range.  Sporadic outlier bursts
model reflections and field-of-view edge artifacts; bursts start more
often near the image edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .depth import DepthFrame
from .errors import ConfigError
from .logio import SensorLogRecord, quantize6
from .monocular import (
    DEFAULT_MODEL,
    KeypointFrame,
    MonocularModelParams,
    branch_gap_cm,
    monocular_cb_inverse,
)

# Nudge below the branch split so far-branch snaps stay in that branch's domain.
_SPLIT_EPS = 1e-6


class Scenario(str, Enum):
    DISCRETE_FWD_BACK = "discrete_fwd_back"
    CONTINUOUS_FWD_BACK = "continuous_fwd_back"
    LATERAL_SWEEP = "lateral_sweep"


@dataclass(frozen=True)
class DepthNoiseModel:
    """Range-dependent depth error model.

    Noise is flat at ``base_sigma`` inside [min_range, optimal_max] and
    grows exponentially beyond ``optimal_max``, where the sensor also
    overshoots by ``overshoot_per_m`` for every meter past that point.
    Beyond ``max_range`` the sensor returns nothing.  ``base_sigma`` may
    be zero to produce noise-free readings for closed-loop tests.
    """

    base_sigma: float = 0.005      # m
    growth_rate: float = 0.8       # 1/m
    min_range: float = 0.4         # m
    optimal_max: float = 4.0       # m
    max_range: float = 10.0        # m
    overshoot_per_m: float = 0.05  # m of bias per m beyond optimal_max

    def __post_init__(self):
        if self.base_sigma < 0.0:
            raise ValueError(f"base_sigma must be >= 0, got {self.base_sigma}")
        if self.growth_rate < 0.0:
            raise ValueError(f"growth_rate must be >= 0, got {self.growth_rate}")
        if not (0.0 < self.min_range < self.optimal_max < self.max_range):
            raise ValueError(
                "ranges must satisfy 0 < min_range < optimal_max < max_range, got "
                f"{self.min_range}, {self.optimal_max}, {self.max_range}"
            )

    def sigma(self, distance_m: float) -> float:
        if distance_m < self.min_range:
            return self.base_sigma * math.exp(
                self.growth_rate * (self.min_range - distance_m)
            )
        if distance_m <= self.optimal_max:
            return self.base_sigma
        return self.base_sigma * math.exp(
            self.growth_rate * (distance_m - self.optimal_max)
        )

    def bias(self, distance_m: float) -> float:
        if distance_m <= self.optimal_max:
            return 0.0
        return self.overshoot_per_m * (distance_m - self.optimal_max)


@dataclass(frozen=True)
class OutlierInjection:
    """Sporadic burst corruption of the depth channel.

    ``probability_per_frame`` is the target fraction of corrupted frames,
    so burst starts are drawn at that probability divided by the mean
    burst length.  Burst offsets are one-sided positive (reflections and
    edge artifacts read far, not near), drawn once per burst as
    ``|N(0, magnitude_sigma)|``.
    """

    probability_per_frame: float = 0.03
    magnitude_sigma: float = 1.0   # m
    burst_min: int = 1
    burst_max: int = 5
    edge_fov_multiplier: float = 4.0

    def __post_init__(self):
        if not (0.0 <= self.probability_per_frame <= 1.0):
            raise ValueError(
                f"probability_per_frame must be in [0, 1], got "
                f"{self.probability_per_frame}"
            )
        if self.magnitude_sigma < 0.0:
            raise ValueError(
                f"magnitude_sigma must be >= 0, got {self.magnitude_sigma}"
            )
        if not (1 <= self.burst_min <= self.burst_max):
            raise ValueError(
                f"need 1 <= burst_min <= burst_max, got "
                f"{self.burst_min}, {self.burst_max}"
            )
        if self.edge_fov_multiplier < 1.0:
            raise ValueError(
                f"edge_fov_multiplier must be >= 1, got {self.edge_fov_multiplier}"
            )

    @property
    def mean_burst_length(self) -> float:
        return 0.5 * (self.burst_min + self.burst_max)

    @property
    def start_probability(self) -> float:
        return self.probability_per_frame / self.mean_burst_length


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one simulated run, RNG seed included."""

    kind: Scenario = Scenario.DISCRETE_FWD_BACK
    duration_s: float = 30.0
    frame_rate: float = 30.0
    seed: int = 0
    depth_noise: DepthNoiseModel = field(default_factory=DepthNoiseModel)
    keypoint_noise_px: float = 1.5
    outliers: OutlierInjection = field(default_factory=OutlierInjection)
    height_mismatch: float = 1.0   # scales S-H pixel length; 1.0 matches the model

    # stepped forward-back
    near_distance: float = 1.5     # m
    far_distance: float = 6.5      # m
    step_m: float = 1.0
    pause_s: float = 3.0
    ramp_speed: float = 0.5        # m/s

    # sinusoidal forward-back
    mean_distance: float = 4.0     # m
    sweep_amplitude: float = 2.5   # m
    sweep_period: float = 20.0     # s

    # lateral sweep
    lateral_standoff: float = 3.0  # m
    lateral_amplitude: float = 2.6  # m
    lateral_period: float = 8.0    # s

    # synthetic camera
    hfov_deg: float = 87.0
    image_width: int = 1280
    image_height: int = 720

    def __post_init__(self):
        if not (self.duration_s > 0.0 and self.frame_rate > 0.0):
            raise ValueError("duration_s and frame_rate must be positive")
        if self.keypoint_noise_px < 0.0:
            raise ValueError(
                f"keypoint_noise_px must be >= 0, got {self.keypoint_noise_px}"
            )
        if self.height_mismatch <= 0.0:
            raise ValueError(
                f"height_mismatch must be positive, got {self.height_mismatch}"
            )
        if not (0.0 < self.near_distance < self.far_distance):
            raise ValueError("need 0 < near_distance < far_distance")
        if self.step_m <= 0.0 or self.pause_s < 0.0 or self.ramp_speed <= 0.0:
            raise ValueError("step_m and ramp_speed must be positive, pause_s >= 0")
        if self.sweep_amplitude >= self.mean_distance:
            raise ValueError("sweep_amplitude must stay below mean_distance")
        if min(self.sweep_period, self.lateral_period) <= 0.0:
            raise ValueError("periods must be positive")
        if self.lateral_standoff <= 0.0 or self.lateral_amplitude < 0.0:
            raise ValueError("lateral geometry must be non-negative, standoff > 0")
        if not (30.0 <= self.hfov_deg <= 170.0):
            raise ValueError(f"hfov_deg out of range: {self.hfov_deg}")

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)


@dataclass(frozen=True)
class GroundTruthFrame:
    """True state for one frame plus the noiseless sensor geometry."""

    timestamp: float
    true_cb: float                # m
    lateral_offset: float         # m, signed
    keypoints: KeypointFrame      # noiseless placement
    line_pixel_count: int         # pixels a rasterized S-H segment would cover
    edge_zone: bool               # subject near the horizontal FOV edge


@dataclass(frozen=True)
class SimulatedStream:
    """Rendered sensor stream plus per-frame injection diagnostics."""

    records: List[SensorLogRecord]
    outlier_flags: List[bool]
    truth: List[GroundTruthFrame]


def model_pixel_length(
    distance_cm: float, model: MonocularModelParams = DEFAULT_MODEL
) -> float:
    """S-H pixel length whose model estimate is closest to ``distance_cm``.

    Distances inside the dead band between branches snap to the nearer
    branch edge, at most half the band width away.
    """
    lo, hi = branch_gap_cm(model)
    if lo < distance_cm <= hi:
        mid = 0.5 * (lo + hi)
        if distance_cm < mid:
            return model.split_px
        return model.split_px - _SPLIT_EPS
    return monocular_cb_inverse(distance_cm, model)


# -- trajectories ---------------------------------------------------------


def _discrete_profile(cfg: ScenarioConfig) -> List[Tuple[float, float, float]]:
    """Segments (duration, d_start, d_end) of one stepped out-and-back cycle."""
    levels = []
    d = cfg.near_distance
    while d < cfg.far_distance - 1e-9:
        levels.append(round(d, 9))
        d += cfg.step_m
    levels.append(cfg.far_distance)
    ramp_t = cfg.step_m / cfg.ramp_speed
    segments: List[Tuple[float, float, float]] = []
    for i, lev in enumerate(levels):
        segments.append((cfg.pause_s, lev, lev))
        if i + 1 < len(levels):
            segments.append((ramp_t, lev, levels[i + 1]))
    for i in range(len(levels) - 1, 0, -1):
        segments.append((ramp_t, levels[i], levels[i - 1]))
        if i - 1 > 0:
            segments.append((cfg.pause_s, levels[i - 1], levels[i - 1]))
    return segments


def _discrete_distance(t: float, segments, cycle_s: float) -> float:
    t = math.fmod(t, cycle_s)
    for dur, d0, d1 in segments:
        if t <= dur:
            return d0 + (d1 - d0) * (t / dur if dur > 0 else 0.0)
        t -= dur
    return segments[-1][2]


def generate_trajectory(
    cfg: ScenarioConfig, model: MonocularModelParams = DEFAULT_MODEL
) -> List[GroundTruthFrame]:
    """Ground-truth frames at the configured frame rate.

    Raises:
        ConfigError: if the trajectory leaves the physically sensible
            band around the depth sensor's working range.
    """
    n = int(round(cfg.duration_s * cfg.frame_rate))
    if n < 1:
        raise ConfigError("duration too short for a single frame")
    segments = cycle_s = None
    if cfg.kind is Scenario.DISCRETE_FWD_BACK:
        segments = _discrete_profile(cfg)
        cycle_s = sum(s[0] for s in segments)

    lo_ok = 0.5 * cfg.depth_noise.min_range
    hi_ok = 1.2 * cfg.depth_noise.max_range
    cx = cfg.image_width / 2.0
    cy = cfg.image_height / 2.0
    frames: List[GroundTruthFrame] = []
    for i in range(n):
        t = quantize6(i / cfg.frame_rate)
        lateral = 0.0
        if cfg.kind is Scenario.DISCRETE_FWD_BACK:
            d = _discrete_distance(t, segments, cycle_s)
        elif cfg.kind is Scenario.CONTINUOUS_FWD_BACK:
            d = cfg.mean_distance + cfg.sweep_amplitude * math.sin(
                2.0 * math.pi * t / cfg.sweep_period - math.pi / 2.0
            )
        else:
            d = cfg.lateral_standoff
            lateral = cfg.lateral_amplitude * math.sin(
                2.0 * math.pi * t / cfg.lateral_period
            )
        if not (lo_ok <= d <= hi_ok):
            raise ConfigError(
                f"trajectory distance {d:.3f} m at t={t:.3f} outside "
                f"[{lo_ok:.3f}, {hi_ok:.3f}] m"
            )

        length_px = model_pixel_length(d * 100.0, model) * cfg.height_mismatch
        u = cx + cfg.focal_px * lateral / d
        shoulder = (u, cy - length_px / 2.0)
        hip = (u, cy + length_px / 2.0)
        in_bounds = (
            0.0 <= u <= cfg.image_width - 1
            and shoulder[1] >= 0.0
            and hip[1] <= cfg.image_height - 1
        )
        half_extent = d * math.tan(math.radians(cfg.hfov_deg) / 2.0)
        frames.append(
            GroundTruthFrame(
                timestamp=t,
                true_cb=d,
                lateral_offset=lateral,
                keypoints=KeypointFrame(
                    timestamp=t, shoulder_mid=shoulder, hip_mid=hip, valid=in_bounds
                ),
                line_pixel_count=int(round(abs(length_px))) + 1,
                edge_zone=abs(lateral) > 0.8 * half_extent,
            )
        )
    return frames


# -- sensor rendering -----------------------------------------------------


def render_sensors(
    truth: Sequence[GroundTruthFrame], cfg: ScenarioConfig
) -> SimulatedStream:
    """Render noisy keypoint and depth streams aligned to ``truth``.

    The RNG consumes a fixed number of draws per frame regardless of
    channel validity, so two runs with the same config are bit-identical.
    All written values are pre-quantized to the log precision; fusing the
    returned records gives exactly what a replay of the written CSV gives.
    """
    rng = np.random.default_rng(cfg.seed)
    records: List[SensorLogRecord] = []
    flags: List[bool] = []
    burst_left = 0
    burst_offset = 0.0
    for gt in truth:
        kp_noise = rng.normal(0.0, 1.0, size=4)
        sh_px: Optional[float] = None
        kf = gt.keypoints
        if kf.valid:
            s = cfg.keypoint_noise_px
            sx = kf.shoulder_mid[0] + s * kp_noise[0]
            sy = kf.shoulder_mid[1] + s * kp_noise[1]
            hx = kf.hip_mid[0] + s * kp_noise[2]
            hy = kf.hip_mid[1] + s * kp_noise[3]
            if (
                0.0 <= sx <= cfg.image_width - 1
                and 0.0 <= hx <= cfg.image_width - 1
                and 0.0 <= sy <= cfg.image_height - 1
                and 0.0 <= hy <= cfg.image_height - 1
            ):
                sh_px = math.hypot(hx - sx, hy - sy)

        depth_noise = rng.normal(0.0, 1.0)
        z: Optional[float] = None
        injected = False
        d = gt.true_cb
        if d <= cfg.depth_noise.max_range:
            z = d + cfg.depth_noise.bias(d) + cfg.depth_noise.sigma(d) * depth_noise
            if burst_left > 0:
                z += burst_offset
                burst_left -= 1
                injected = True
            else:
                p_start = cfg.outliers.start_probability
                if gt.edge_zone:
                    p_start = min(1.0, p_start * cfg.outliers.edge_fov_multiplier)
                if rng.random() < p_start:
                    length = int(
                        rng.integers(cfg.outliers.burst_min, cfg.outliers.burst_max + 1)
                    )
                    burst_offset = abs(rng.normal(0.0, cfg.outliers.magnitude_sigma))
                    z += burst_offset
                    burst_left = length - 1
                    injected = True
            if z > cfg.depth_noise.max_range:
                z = None
                injected = False
            elif z <= 0.0:
                z = 0.001
        records.append(
            SensorLogRecord(
                t=gt.timestamp,
                sh_px=quantize6(sh_px) if sh_px is not None else None,
                depth_cb_m=quantize6(z) if z is not None else None,
                gt_cb_m=quantize6(gt.true_cb),
            )
        )
        flags.append(injected)
    return SimulatedStream(records=records, outlier_flags=flags, truth=list(truth))


def simulate_stream(
    cfg: ScenarioConfig, model: MonocularModelParams = DEFAULT_MODEL
) -> SimulatedStream:
    """Generate a trajectory and render its sensor stream in one call."""
    return render_sensors(generate_trajectory(cfg, model), cfg)


def make_depth_frame(
    width: int,
    height: int,
    fill_m: float,
    holes: Sequence[Tuple[int, int]] = (),
    jitter_sigma: float = 0.0,
    seed: int = 0,
) -> DepthFrame:
    """Small uniform depth image for unit tests; ``holes`` become no-returns.

    Limited to 64x64, this is a test fixture, not an image renderer.
    """
    if width > 64 or height > 64:
        raise ValueError("test depth frames are limited to 64x64")
    data = np.full((height, width), float(fill_m))
    if jitter_sigma > 0.0:
        rng = np.random.default_rng(seed)
        data = data + rng.normal(0.0, jitter_sigma, size=data.shape)
        data = np.clip(data, 0.0, None)
    for x, y in holes:
        data[y, x] = 0.0
    return DepthFrame(width=width, height=height, depth=data)
