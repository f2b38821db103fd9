"""Report figures rendered to files, no interactive backend required."""

from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .fusion import FusionOutput
from .logio import SensorLogRecord


def _series(pairs):
    ts = [t for t, v in pairs]
    vs = [v for t, v in pairs]
    return ts, vs


def render_report(
    records: Sequence[SensorLogRecord],
    outputs: Sequence[FusionOutput],
    out_dir,
) -> List[Path]:
    """Write distance/error and gate/covariance figures under ``out_dir``.

    Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    gt = [(r.t, r.gt_cb_m) for r in records if r.gt_cb_m is not None]
    keyp = [(o.timestamp, o.monocular_cb) for o in outputs if o.monocular_cb is not None]
    depth = [(o.timestamp, o.depth_cb) for o in outputs if o.depth_cb is not None]
    fused = [
        (o.timestamp, o.fused_cb)
        for o in outputs
        if o.fused_cb == o.fused_cb  # skip NaN pre-init frames
    ]
    gt_at: dict = {t: v for t, v in gt}

    fig, (ax_d, ax_e) = plt.subplots(
        2, 1, figsize=(9.0, 6.5), sharex=True, constrained_layout=True
    )
    if gt:
        ax_d.plot(*_series(gt), color="black", lw=1.0, ls="--", label="truth")
    if keyp:
        ax_d.plot(*_series(keyp), lw=0.7, alpha=0.7, label="keypoint")
    if depth:
        ax_d.plot(*_series(depth), lw=0.7, alpha=0.7, label="depth")
    if fused:
        ax_d.plot(*_series(fused), lw=1.2, label="fused")
    ax_d.set_ylabel("camera-body distance [m]")
    ax_d.legend(loc="upper right", fontsize=8)
    ax_d.grid(True, alpha=0.3)

    for name, series in (("keypoint", keyp), ("depth", depth), ("fused", fused)):
        err = [
            (t, (v - gt_at[t]) * 100.0) for t, v in series if t in gt_at
        ]
        if err:
            ax_e.plot(*_series(err), lw=0.7, label=name)
    ax_e.axhline(0.0, color="black", lw=0.5)
    ax_e.set_xlabel("time [s]")
    ax_e.set_ylabel("error [cm]")
    ax_e.legend(loc="upper right", fontsize=8)
    ax_e.grid(True, alpha=0.3)

    p = out / "distance_error.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)

    fig, (ax_g, ax_c) = plt.subplots(
        2, 1, figsize=(9.0, 4.5), sharex=True, constrained_layout=True
    )
    ts = [o.timestamp for o in outputs]
    ax_g.step(ts, [1 if o.gate_open else 0 for o in outputs], where="post", lw=0.8)
    ax_g.set_ylabel("gate open")
    ax_g.set_yticks([0, 1])
    ax_g.grid(True, alpha=0.3)
    cov = [(o.timestamp, o.covariance_trace) for o in outputs if o.covariance_trace == o.covariance_trace]
    if cov:
        ax_c.plot(*_series(cov), lw=0.8)
    ax_c.set_xlabel("time [s]")
    ax_c.set_ylabel("covariance trace")
    ax_c.grid(True, alpha=0.3)

    p = out / "gate_covariance.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    written.append(p)
    return written
