"""Constant-velocity Kalman fusion of depth and keypoint distance channels.

The filter tracks a two-element state, camera-to-body distance p in meters
and its rate p_dot in m/s, with the usual constant-velocity transition.
The two sensing channels enter asymmetrically:

* The depth channel is the measurement.  Each accepted reading corrects
  the state through a scalar gain; readings whose frame-to-frame
  derivative jumps well above the recent average are rejected by the
  outlier gate and never touch the state.
* The keypoint channel drives the prediction.  The finite difference of
  consecutive accepted monocular estimates replaces p_dot just before
  each predict, so the filter keeps following the subject's motion while
  the gate is closed or the depth sensor is outside its usable range.

Rejected samples are kept out of the gate's derivative history, otherwise
a burst of bad readings would inflate the rolling mean and let the tail
of the burst through.  That policy alone can wedge the gate shut after a
genuine change of motion (every honest sample keeps looking like an
outlier against a stale quiet history), so a bounded run of consecutive
rejections clears the history and re-anchors on the current reading.

The filter is a sequential state machine; one engine instance per tracked
subject, fed frames in timestamp order.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .depth import DepthLineSample
from .errors import ModelDomainError, StreamOrderError
from .monocular import (
    DEFAULT_MODEL,
    KeypointFrame,
    MonocularModelParams,
    ShOutlierConfig,
    derivative_ratio_outlier,
    monocular_cb_estimate,
    monocular_sensitivity,
    sh_pixel_distance,
)

# Floor applied when a prediction drives the distance non-positive.
MIN_DISTANCE_M = 0.05


@dataclass(frozen=True)
class NoiseConfig:
    """Process and measurement noise, plus the initial state covariance."""

    sigma_p_sq: float = 0.02      # m^2, distance process noise per step
    sigma_pdot_sq: float = 0.8    # (m/s)^2, velocity process noise per step
    sigma_z_sq: float = 0.018     # m^2, depth measurement variance
    p0_p_sq: float = 0.25         # m^2, initial distance variance
    p0_pdot_sq: float = 1.0       # (m/s)^2, initial velocity variance

    def __post_init__(self):
        for name in (
            "sigma_p_sq",
            "sigma_pdot_sq",
            "sigma_z_sq",
            "p0_p_sq",
            "p0_pdot_sq",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v}")


@dataclass(frozen=True)
class GateConfig:
    """Depth outlier gate: derivative-ratio test plus a recovery bound.

    ``max_consecutive_rejections`` caps how long the gate may stay closed
    before its history is declared stale; re-anchoring is then subject to
    an innovation plausibility check against the filter state.  The cap
    must comfortably exceed the longest outlier burst expected from the
    sensor so that a burst cannot trip it, while staying short enough
    that a spurious rejection streak cannot hold the filter off fresh
    data for long.
    """

    window: int = 10
    rel_threshold: float = 1.25
    max_consecutive_rejections: int = 8

    def __post_init__(self):
        if self.window < 2:
            raise ValueError(f"window must be >= 2, got {self.window}")
        if not self.rel_threshold > 1.0:
            raise ValueError(f"rel_threshold must be > 1, got {self.rel_threshold}")
        if self.max_consecutive_rejections < 1:
            raise ValueError(
                "max_consecutive_rejections must be >= 1, got "
                f"{self.max_consecutive_rejections}"
            )


@dataclass(frozen=True)
class FilterState:
    """Filter state at one instant: distance, rate, and 2x2 covariance."""

    p: float           # m
    p_dot: float       # m/s
    P: np.ndarray = field(repr=False)
    timestamp: float = 0.0
    clamped: bool = False  # last prediction hit the distance floor

    def __post_init__(self):
        arr = np.asarray(self.P, dtype=float).reshape(2, 2)
        object.__setattr__(self, "P", arr)

    @property
    def cov_trace(self) -> float:
        return float(self.P[0, 0] + self.P[1, 1])


@dataclass(frozen=True)
class FusionOutput:
    """Per-frame record of the fused estimate and both raw channels."""

    timestamp: float
    fused_cb: float                    # m; NaN only before initialization
    monocular_cb: Optional[float]      # m, this frame's keypoint estimate
    depth_cb: Optional[float]          # m, this frame's raw depth reading
    gate_open: bool                    # depth accepted and applied this frame
    covariance_trace: float            # NaN before initialization
    pre_init: bool = False             # emitted before the filter had a state
    clamped: bool = False              # prediction hit the distance floor
    coasted: bool = False              # neither channel present this frame


def ekf_predict(state: FilterState, dt: float, noise: NoiseConfig) -> FilterState:
    """Advance the state by ``dt`` seconds under the constant-velocity model.

    Covariance update is written out in scalars for the 2x2 case.  A
    prediction that lands at or below zero distance is floored at
    ``MIN_DISTANCE_M`` and flagged, never emitted as non-physical.

    Raises:
        ValueError: if ``dt`` is not a positive finite number.
    """
    if not (math.isfinite(dt) and dt > 0.0):
        raise ValueError(f"dt must be positive and finite, got {dt}")
    a, b = float(state.P[0, 0]), float(state.P[0, 1])
    c, d = float(state.P[1, 0]), float(state.P[1, 1])
    p = state.p + dt * state.p_dot
    clamped = False
    if p <= 0.0:
        p = MIN_DISTANCE_M
        clamped = True
    new_P = np.array(
        [
            [a + dt * (b + c) + dt * dt * d + noise.sigma_p_sq, b + dt * d],
            [c + dt * d, d + noise.sigma_pdot_sq],
        ]
    )
    return FilterState(
        p=p,
        p_dot=state.p_dot,
        P=new_P,
        timestamp=state.timestamp + dt,
        clamped=clamped,
    )


def ekf_correct(
    state: FilterState,
    z: float,
    noise: NoiseConfig,
    r: Optional[float] = None,
) -> FilterState:
    """Fold the distance measurement ``z`` (meters) into the state.

    Measurement model is direct observation of p, so the gain reduces to
    one column.  The covariance is re-symmetrized after the update to
    stop floating-point drift from accumulating over long runs.  ``r``
    overrides the depth measurement variance when given.

    Raises:
        ValueError: if ``z`` or ``r`` is not positive and finite.
    """
    if not (math.isfinite(z) and z > 0.0):
        raise ValueError(f"measurement must be positive and finite, got {z}")
    rv = noise.sigma_z_sq if r is None else r
    if not (math.isfinite(rv) and rv > 0.0):
        raise ValueError(f"measurement variance must be positive, got {rv}")
    a, b = float(state.P[0, 0]), float(state.P[0, 1])
    c, d = float(state.P[1, 0]), float(state.P[1, 1])
    s = a + rv
    k1 = a / s
    k2 = c / s
    innov = z - state.p
    n00 = (1.0 - k1) * a
    n01 = (1.0 - k1) * b
    n10 = c - k2 * a
    n11 = d - k2 * b
    off = 0.5 * (n01 + n10)
    new_P = np.array([[n00, off], [off, n11]])
    return FilterState(
        p=state.p + k1 * innov,
        p_dot=state.p_dot + k2 * innov,
        P=new_P,
        timestamp=state.timestamp,
        clamped=False,
    )


def gate_check(
    history: Sequence[Tuple[float, float]],
    config: Optional[GateConfig] = None,
) -> bool:
    """True when the newest depth reading's derivative marks it an outlier.

    ``history`` holds (timestamp, depth_m) pairs, previously accepted
    readings plus the candidate as the final entry.  Warm-up (fewer than
    ``window`` prior derivatives) reports False.
    """
    cfg = config or GateConfig()
    return derivative_ratio_outlier(history, cfg.window, cfg.rel_threshold)


class FusionEngine:
    """Stateful per-subject fusion loop.

    Initialization waits for the first depth reading; if none arrives
    within ``init_grace_frames`` frames, the first monocular estimate
    seen so far seeds the state instead.  Frames before initialization
    echo whichever channel is present and are flagged ``pre_init``.

    Keypoint-sourced velocity has three safeguards.  It is only derived
    from frames where the model's local slope stays at or below
    ``max_px_sensitivity`` cm/px: near the far branch's asymptote one
    pixel of jitter maps to meters of distance, so a finite difference
    there measures noise, not motion.  The result is clamped to
    ``max_speed``, and it expires after ``coast_limit_s`` without a
    fresh anchor from either channel, after which the filter holds
    position rather than extrapolating a stale rate.
    """

    def __init__(
        self,
        model: MonocularModelParams = DEFAULT_MODEL,
        noise: Optional[NoiseConfig] = None,
        gate: Optional[GateConfig] = None,
        sh_filter: Optional[ShOutlierConfig] = None,
        max_speed: float = 3.0,
        coast_limit_s: float = 0.2,
        max_px_sensitivity: float = 15.0,
        init_grace_frames: int = 10,
        mono_as_measurement: bool = False,
        mono_r: float = 0.09,
        reanchor_mono_margin_m: float = 0.5,
    ):
        self.model = model
        self.noise = noise or NoiseConfig()
        self.gate = gate or GateConfig()
        self.sh_filter = sh_filter or ShOutlierConfig()
        self.max_speed = max_speed
        self.coast_limit_s = coast_limit_s
        self.max_px_sensitivity = max_px_sensitivity
        self.init_grace_frames = init_grace_frames
        self.mono_as_measurement = mono_as_measurement
        self.mono_r = mono_r
        self.reanchor_mono_margin_m = reanchor_mono_margin_m

        self.state: Optional[FilterState] = None
        self._frames_seen = 0
        self._sh_hist: deque = deque(maxlen=self.sh_filter.window + 2)
        self._sh_rejects = 0
        self._depth_hist: deque = deque(maxlen=self.gate.window + 2)
        self._gate_rejects = 0
        # (t, estimate m, slope within the velocity-grade bound)
        self._last_mono: Optional[Tuple[float, float, bool]] = None
        self._first_mono: Optional[float] = None
        self._last_anchor_t: Optional[float] = None

    # -- channel handling -------------------------------------------------

    def _process_keypoint(
        self, t: float, sh_px: Optional[float]
    ) -> Tuple[Optional[float], Optional[float]]:
        """Returns (raw monocular estimate in m or None, fresh velocity or None)."""
        if sh_px is None:
            return None, None
        if not (math.isfinite(sh_px) and sh_px > 0.0):
            raise ValueError(f"sh_px must be positive and finite, got {sh_px}")
        try:
            mono_m = self.model_estimate(sh_px)
            vel_grade = (
                monocular_sensitivity(sh_px, self.model) <= self.max_px_sensitivity
            )
        except ModelDomainError:
            mono_m = None
            vel_grade = False

        candidate = list(self._sh_hist) + [(t, sh_px)]
        if len(candidate) >= 2:
            flagged = derivative_ratio_outlier(
                candidate, self.sh_filter.window, self.sh_filter.rel_threshold
            )
        else:
            flagged = False
        if flagged:
            self._sh_rejects += 1
            # Long rejection runs mean the history no longer describes the pose.
            if self._sh_rejects >= 2 * self.sh_filter.window:
                self._sh_hist.clear()
                self._sh_rejects = 0
                self._sh_hist.append((t, sh_px))
            else:
                return mono_m, None
        else:
            self._sh_rejects = 0
            self._sh_hist.append((t, sh_px))

        if mono_m is None:
            return None, None
        velocity = None
        if self._last_mono is not None:
            t_prev, m_prev, grade_prev = self._last_mono
            if t > t_prev and vel_grade and grade_prev:
                velocity = (mono_m - m_prev) / (t - t_prev)
        self._last_mono = (t, mono_m, vel_grade)
        if self._first_mono is None:
            self._first_mono = mono_m
        return mono_m, velocity

    def model_estimate(self, sh_px: float) -> float:
        """Monocular estimate in meters for an S-H length, domain errors propagate."""
        return monocular_cb_estimate(sh_px, self.model) / 100.0

    def _innovation_plausible(self, z: float) -> bool:
        """Three-sigma innovation band around the predicted position.

        The band widens while the gate stays closed (prediction variance
        grows every frame), so recovery is guaranteed even from a badly
        drifted state.
        """
        innov = z - self.state.p
        s = float(self.state.P[0, 0]) + self.noise.sigma_z_sq
        return innov * innov <= 9.0 * s

    def _mono_consistent(self, t: float, z: float) -> bool:
        """Cross-channel check before re-anchoring onto a depth reading.

        The innovation band alone grows wide enough during a closure to
        admit a long outlier run, so when a fresh velocity-grade keypoint
        estimate exists (position error decimeters at most), the reading
        must also land within ``reanchor_mono_margin_m`` of it.  At long
        range there is no trustworthy estimate to compare with and the
        check stands aside.
        """
        if self._last_mono is None:
            return True
        t_mono, est_m, grade = self._last_mono
        if not grade or t - t_mono > self.coast_limit_s:
            return True
        return abs(z - est_m) <= self.reanchor_mono_margin_m

    def _gate_depth(self, t: float, z: float) -> bool:
        """Returns True when ``z`` is accepted; maintains gate history.

        After ``max_consecutive_rejections`` straight rejections the
        history is declared stale and the innovation band decides when
        to re-anchor.  While the ratio test is still warming up (right
        after initialisation or such a re-anchor) it cannot flag
        anything, so a burst arriving inside that window would be
        absorbed wholesale; the keypoint cross-check closes the hole.
        Only the cross-check is used here, not the innovation band: if
        the re-anchor itself landed on a bad reading, clean samples show
        a large innovation and an innovation veto would lock the error
        in, whereas a trustworthy nearby keypoint estimate discriminates
        correctly in both directions.
        """
        candidate = list(self._depth_hist) + [(t, z)]
        if len(candidate) >= 2:
            flagged = derivative_ratio_outlier(
                candidate, self.gate.window, self.gate.rel_threshold
            )
        else:
            flagged = False
        warmup = len(self._depth_hist) < self.gate.window + 1
        if not flagged and warmup:
            flagged = not self._mono_consistent(t, z)
        if flagged:
            if self._gate_rejects < self.gate.max_consecutive_rejections:
                self._gate_rejects += 1
            if self._gate_rejects >= self.gate.max_consecutive_rejections:
                if self._innovation_plausible(z) and self._mono_consistent(t, z):
                    self._depth_hist.clear()
                    self._gate_rejects = 0
                    self._depth_hist.append((t, z))
                    return True
            return False
        self._gate_rejects = 0
        self._depth_hist.append((t, z))
        return True

    # -- stepping ---------------------------------------------------------

    def fuse_step(
        self,
        keypoint_frame: Optional[KeypointFrame] = None,
        depth_sample: Optional[DepthLineSample] = None,
    ) -> FusionOutput:
        """Advance one frame from channel objects.

        Timestamps of the two channels must agree when both are present;
        invalid keypoint frames are treated as channel-absent.
        """
        t = None
        sh_px = None
        depth_m = None
        if keypoint_frame is not None and keypoint_frame.valid:
            sh_px = sh_pixel_distance(keypoint_frame)
            t = keypoint_frame.timestamp
        if depth_sample is not None:
            depth_m = depth_sample.mean_depth
            if t is not None and abs(depth_sample.timestamp - t) > 1e-9:
                raise ValueError(
                    "keypoint and depth samples carry different timestamps: "
                    f"{t} vs {depth_sample.timestamp}"
                )
            t = depth_sample.timestamp
        if t is None:
            raise ValueError("at least one channel must carry a timestamp")
        return self.step(t, sh_px=sh_px, depth_m=depth_m)

    def step(
        self,
        t: float,
        sh_px: Optional[float] = None,
        depth_m: Optional[float] = None,
    ) -> FusionOutput:
        """Advance one frame from raw channel values; either may be None."""
        if not math.isfinite(t):
            raise ValueError(f"timestamp must be finite, got {t}")
        if self.state is not None and t <= self.state.timestamp:
            raise StreamOrderError(
                f"timestamp {t} not after state time {self.state.timestamp}"
            )
        if depth_m is not None and not (math.isfinite(depth_m) and depth_m > 0.0):
            raise ValueError(f"depth must be positive and finite, got {depth_m}")
        self._frames_seen += 1
        coasted = sh_px is None and depth_m is None

        mono_m, velocity = self._process_keypoint(t, sh_px)

        if self.state is None:
            return self._pre_init_step(t, mono_m, depth_m, coasted)

        # Keypoint velocity drives the prediction; without a fresh one the
        # state's own rate coasts until the anchor goes stale.
        if velocity is not None:
            v = max(-self.max_speed, min(self.max_speed, velocity))
            self.state = replace(self.state, p_dot=v)
            self._last_anchor_t = t
        elif (
            self._last_anchor_t is not None
            and t - self._last_anchor_t > self.coast_limit_s
        ):
            self.state = replace(self.state, p_dot=0.0)

        dt = t - self.state.timestamp
        self.state = ekf_predict(self.state, dt, self.noise)
        clamped = self.state.clamped

        gate_open = False
        if depth_m is not None:
            if self._gate_depth(t, depth_m):
                self.state = ekf_correct(self.state, depth_m, self.noise)
                gate_open = True
                self._last_anchor_t = t

        if self.mono_as_measurement and mono_m is not None:
            self.state = ekf_correct(self.state, mono_m, self.noise, r=self.mono_r)

        return FusionOutput(
            timestamp=t,
            fused_cb=self.state.p,
            monocular_cb=mono_m,
            depth_cb=depth_m,
            gate_open=gate_open,
            covariance_trace=self.state.cov_trace,
            clamped=clamped,
            coasted=coasted,
        )

    def _pre_init_step(
        self,
        t: float,
        mono_m: Optional[float],
        depth_m: Optional[float],
        coasted: bool,
    ) -> FusionOutput:
        """Handle a frame before the filter has a state."""
        init_p = None
        if depth_m is not None:
            init_p = depth_m
        elif self._frames_seen > self.init_grace_frames and self._first_mono is not None:
            init_p = self._first_mono

        if init_p is not None:
            self.state = FilterState(
                p=init_p,
                p_dot=0.0,
                P=np.diag([self.noise.p0_p_sq, self.noise.p0_pdot_sq]),
                timestamp=t,
            )
            self._last_anchor_t = t
            if depth_m is not None:
                self._depth_hist.append((t, depth_m))
            return FusionOutput(
                timestamp=t,
                fused_cb=self.state.p,
                monocular_cb=mono_m,
                depth_cb=depth_m,
                gate_open=depth_m is not None,
                covariance_trace=self.state.cov_trace,
                coasted=coasted,
            )

        # Still waiting: echo what we have, flag the frame.
        echo = mono_m
        if echo is None and self._last_mono is not None:
            echo = self._last_mono[1]
        return FusionOutput(
            timestamp=t,
            fused_cb=echo if echo is not None else math.nan,
            monocular_cb=mono_m,
            depth_cb=depth_m,
            gate_open=False,
            covariance_trace=math.nan,
            pre_init=True,
            coasted=coasted,
        )


def run_fusion(
    records: Iterable,
    model: MonocularModelParams = DEFAULT_MODEL,
    noise: Optional[NoiseConfig] = None,
    gate: Optional[GateConfig] = None,
    sh_filter: Optional[ShOutlierConfig] = None,
    **engine_kwargs,
) -> List[FusionOutput]:
    """Run the fusion loop over a paired sensor stream.

    ``records`` yield objects with ``t``, ``sh_px`` and ``depth_cb_m``
    attributes (either channel may be None).  Produces one output per
    record; an empty stream produces an empty list.

    Raises:
        StreamOrderError: naming the offending record index when
            timestamps are not strictly increasing.
    """
    engine = FusionEngine(
        model=model, noise=noise, gate=gate, sh_filter=sh_filter, **engine_kwargs
    )
    outputs: List[FusionOutput] = []
    prev_t = None
    for i, rec in enumerate(records):
        t = rec.t
        if prev_t is not None and t <= prev_t:
            raise StreamOrderError(
                f"record {i}: timestamp {t} not after previous {prev_t}"
            )
        prev_t = t
        outputs.append(engine.step(t, sh_px=rec.sh_px, depth_m=rec.depth_cb_m))
    return outputs
