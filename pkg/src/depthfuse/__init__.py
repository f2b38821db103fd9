"""Camera-to-body distance estimation fusing pose keypoints with depth.

A monocular channel maps the shoulder-hip pixel length through a
piecewise log model; a depth channel averages returns along that segment.
A constant-velocity Kalman filter fuses them, with the keypoint stream
driving prediction and a derivative-ratio gate protecting the correction
from depth outliers.
"""

from .depth import (
    DepthFrame,
    DepthLineSample,
    PIXEL_ENVELOPE,
    extract_cb_measurement,
    rasterize_line,
)
from .errors import (
    ConfigError,
    DepthFuseError,
    InsufficientHistoryError,
    InvalidFrameError,
    LogParseError,
    ModelDomainError,
    NoValidPixelsError,
    OutOfBoundsError,
    PixelRangeError,
    StreamOrderError,
)
from .fusion import (
    FilterState,
    FusionEngine,
    FusionOutput,
    GateConfig,
    MIN_DISTANCE_M,
    NoiseConfig,
    ekf_correct,
    ekf_predict,
    gate_check,
    run_fusion,
)
from .logio import (
    SensorLogRecord,
    parse_sensor_log,
    quantize6,
    write_metrics_json,
    write_plotdata_csv,
    write_stream_csv,
    write_trace_csv,
)
from .metrics import MetricsReport, compute_metrics
from .monocular import (
    DEFAULT_MODEL,
    KeypointFrame,
    LogBranch,
    MonocularModelParams,
    ShOutlierConfig,
    branch_gap_cm,
    derivative_ratio_outlier,
    monocular_cb_estimate,
    monocular_cb_inverse,
    monocular_sensitivity,
    sh_outlier_check,
    sh_pixel_distance,
)
from .plots import render_report
from .simulate import (
    DepthNoiseModel,
    GroundTruthFrame,
    OutlierInjection,
    Scenario,
    ScenarioConfig,
    SimulatedStream,
    generate_trajectory,
    make_depth_frame,
    model_pixel_length,
    render_sensors,
    simulate_stream,
)

__version__ = "0.1.0"
