"""Sensor log and result file formats.

All delimited output uses fixed six-decimal formatting and a bare ``\\n``
line terminator, so identical inputs produce byte-identical files.  The
paired sensor stream round-trips: values are quantized to the written
precision before fusion ever sees them, which makes replaying a written
stream reproduce the original trace exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

from .errors import LogParseError
from .fusion import FusionOutput

STREAM_HEADER = ("t", "sh_px", "depth_cb_m", "gt_cb_m")
TRACE_HEADER = ("t", "fused_m", "keypoint_m", "depth_m", "gate_open", "cov_trace")
PLOTDATA_HEADER = ("t", "series", "value")


def quantize6(value: float) -> float:
    """Snap a float to the closest six-decimal value, the written precision."""
    return float(f"{value:.6f}")


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return f"{value:.6f}"


@dataclass(frozen=True)
class SensorLogRecord:
    """One paired-stream row; missing channels are None."""

    t: float
    sh_px: Optional[float] = None
    depth_cb_m: Optional[float] = None
    gt_cb_m: Optional[float] = None


def _parse_optional(token: str, name: str, line_no: int) -> Optional[float]:
    token = token.strip()
    if token == "":
        return None
    try:
        v = float(token)
    except ValueError:
        raise LogParseError(f"{name} is not a number: {token!r}", line=line_no)
    if not math.isfinite(v):
        raise LogParseError(f"{name} must be finite, got {token!r}", line=line_no)
    if v <= 0.0:
        raise LogParseError(f"{name} must be positive, got {token!r}", line=line_no)
    return v


def parse_sensor_log(path) -> List[SensorLogRecord]:
    """Read a paired sensor stream CSV.

    Raises:
        LogParseError: on a missing or wrong header, malformed row,
            non-positive value, or non-monotone timestamps; the message
            carries the 1-based line number.
        OSError: if the file cannot be read.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise LogParseError("empty log file, expected a header row")
    header = tuple(col.strip() for col in lines[0].split(","))
    if header != STREAM_HEADER:
        raise LogParseError(
            f"bad header {lines[0]!r}, expected {','.join(STREAM_HEADER)!r}", line=1
        )
    records: List[SensorLogRecord] = []
    prev_t = None
    for i, raw in enumerate(lines[1:], start=2):
        if raw.strip() == "":
            continue
        parts = raw.split(",")
        if len(parts) != len(STREAM_HEADER):
            raise LogParseError(
                f"expected {len(STREAM_HEADER)} fields, got {len(parts)}", line=i
            )
        try:
            t = float(parts[0])
        except ValueError:
            raise LogParseError(f"t is not a number: {parts[0]!r}", line=i)
        if not math.isfinite(t):
            raise LogParseError(f"t must be finite, got {parts[0]!r}", line=i)
        if prev_t is not None and t <= prev_t:
            raise LogParseError(
                f"timestamps must be strictly increasing, {t} after {prev_t}", line=i
            )
        prev_t = t
        records.append(
            SensorLogRecord(
                t=t,
                sh_px=_parse_optional(parts[1], "sh_px", i),
                depth_cb_m=_parse_optional(parts[2], "depth_cb_m", i),
                gt_cb_m=_parse_optional(parts[3], "gt_cb_m", i),
            )
        )
    return records


def write_stream_csv(records: Sequence[SensorLogRecord], path) -> None:
    rows = [",".join(STREAM_HEADER)]
    for r in records:
        rows.append(
            ",".join((_fmt(r.t), _fmt(r.sh_px), _fmt(r.depth_cb_m), _fmt(r.gt_cb_m)))
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_trace_csv(outputs: Sequence[FusionOutput], path) -> None:
    rows = [",".join(TRACE_HEADER)]
    for o in outputs:
        rows.append(
            ",".join(
                (
                    _fmt(o.timestamp),
                    _fmt(o.fused_cb),
                    _fmt(o.monocular_cb),
                    _fmt(o.depth_cb),
                    "1" if o.gate_open else "0",
                    _fmt(o.covariance_trace),
                )
            )
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


def write_metrics_json(reports: Sequence, path) -> None:
    """Write method metric rows as a JSON array, stable key order."""
    payload = [r.as_dict() for r in reports]
    Path(path).write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n"
    )


def write_plotdata_csv(
    records: Sequence[SensorLogRecord],
    outputs: Sequence[FusionOutput],
    path,
) -> None:
    """Long-form per-frame series for external plotting.

    One row per (frame, series).  Distance series are in meters; error
    series, present only where both estimate and truth exist, are in
    centimeters.
    """
    if len(records) != len(outputs):
        raise ValueError(
            f"records and outputs differ in length: {len(records)} vs {len(outputs)}"
        )
    rows = [",".join(PLOTDATA_HEADER)]

    def emit(t: float, series: str, value: Optional[float]) -> None:
        if value is None or not math.isfinite(value):
            return
        rows.append(f"{_fmt(t)},{series},{_fmt(value)}")

    for r, o in zip(records, outputs):
        gt = r.gt_cb_m
        emit(r.t, "gt_m", gt)
        emit(r.t, "keypoint_m", o.monocular_cb)
        emit(r.t, "depth_m", o.depth_cb)
        emit(r.t, "fused_m", o.fused_cb)
        if gt is not None:
            for series, est in (
                ("err_keypoint_cm", o.monocular_cb),
                ("err_depth_cm", o.depth_cb),
                ("err_fused_cm", o.fused_cb),
            ):
                if est is not None and math.isfinite(est):
                    emit(r.t, series, (est - gt) * 100.0)
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
