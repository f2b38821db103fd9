"""Command-line interface: simulate scenarios and replay recorded streams.

Exit codes: 0 success, 1 configuration or input-content errors, 2 I/O
errors.  Nothing is printed to stdout; diagnostics go to stderr at the
level chosen by the DEPTHFUSE_LOG_LEVEL environment variable (error,
warn, info or debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .errors import ConfigError, DepthFuseError
from .fusion import run_fusion
from .logio import (
    parse_sensor_log,
    write_metrics_json,
    write_plotdata_csv,
    write_stream_csv,
    write_trace_csv,
)
from .metrics import compute_metrics, empty_report
from .simulate import (
    DepthNoiseModel,
    OutlierInjection,
    Scenario,
    ScenarioConfig,
    simulate_stream,
)

LOG = logging.getLogger("depthfuse")

_SCENARIOS = {
    "discrete": Scenario.DISCRETE_FWD_BACK,
    "continuous": Scenario.CONTINUOUS_FWD_BACK,
    "lateral": Scenario.LATERAL_SWEEP,
}

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

# simulate settings that may come from a config file; value parsers included
_FILE_KEYS = {
    "scenario": str,
    "seed": int,
    "duration": float,
    "fps": float,
    "out": str,
    "keypoint_noise_px": float,
    "base_sigma": float,
    "growth_rate": float,
    "outlier_prob": float,
    "magnitude_sigma": float,
    "edge_multiplier": float,
    "height_mismatch": float,
}


class _Parser(argparse.ArgumentParser):
    """argparse reports usage problems as ConfigError so they exit 1."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depthfuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic scenario end to end")
    sim.add_argument("--scenario", choices=sorted(_SCENARIOS), default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--duration", type=float, default=None, help="seconds")
    sim.add_argument("--fps", type=float, default=None, help="frames per second")
    sim.add_argument("--out", default=None, help="output directory")
    sim.add_argument("--keypoint-noise-px", type=float, default=None)
    sim.add_argument("--base-sigma", type=float, default=None, help="depth noise floor, m")
    sim.add_argument("--growth-rate", type=float, default=None, help="1/m beyond 4 m")
    sim.add_argument("--outlier-prob", type=float, default=None)
    sim.add_argument("--magnitude-sigma", type=float, default=None, help="m")
    sim.add_argument("--edge-multiplier", type=float, default=None)
    sim.add_argument("--height-mismatch", type=float, default=None)
    sim.add_argument("--config", default=None, help="key=value file; flags override it")
    sim.add_argument("--figures", action="store_true", help="also render report figures")

    rep = sub.add_parser("replay", help="re-run fusion over a recorded stream")
    rep.add_argument("--log", required=True, help="stream.csv to replay")
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--figures", action="store_true", help="also render report figures")
    return parser


def load_config_file(path: str) -> dict:
    """Parse a flat key=value settings file, '#' comments allowed."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        raise
    values = {}
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _FILE_KEYS:
            raise ConfigError(f"{path}:{i}: unknown setting {key!r}")
        try:
            values[key] = _FILE_KEYS[key](val)
        except ValueError:
            raise ConfigError(f"{path}:{i}: bad value for {key}: {val!r}")
    return values


def _merged_settings(args) -> dict:
    settings = {}
    if args.config is not None:
        settings.update(load_config_file(args.config))
    overrides = {
        "scenario": args.scenario,
        "seed": args.seed,
        "duration": args.duration,
        "fps": args.fps,
        "out": args.out,
        "keypoint_noise_px": args.keypoint_noise_px,
        "base_sigma": args.base_sigma,
        "growth_rate": args.growth_rate,
        "outlier_prob": args.outlier_prob,
        "magnitude_sigma": args.magnitude_sigma,
        "edge_multiplier": args.edge_multiplier,
        "height_mismatch": args.height_mismatch,
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return settings


def _scenario_config(settings: dict) -> ScenarioConfig:
    name = settings.get("scenario")
    if name is None:
        raise ConfigError("--scenario is required (flag or config file)")
    if name not in _SCENARIOS:
        raise ConfigError(
            f"unknown scenario {name!r}, expected one of {', '.join(sorted(_SCENARIOS))}"
        )
    noise_kwargs = {}
    if "base_sigma" in settings:
        noise_kwargs["base_sigma"] = settings["base_sigma"]
    if "growth_rate" in settings:
        noise_kwargs["growth_rate"] = settings["growth_rate"]
    outlier_kwargs = {}
    if "outlier_prob" in settings:
        outlier_kwargs["probability_per_frame"] = settings["outlier_prob"]
    if "magnitude_sigma" in settings:
        outlier_kwargs["magnitude_sigma"] = settings["magnitude_sigma"]
    if "edge_multiplier" in settings:
        outlier_kwargs["edge_fov_multiplier"] = settings["edge_multiplier"]
    kwargs = {
        "kind": _SCENARIOS[name],
        "depth_noise": DepthNoiseModel(**noise_kwargs),
        "outliers": OutlierInjection(**outlier_kwargs),
    }
    if "seed" in settings:
        kwargs["seed"] = settings["seed"]
    if "duration" in settings:
        kwargs["duration_s"] = settings["duration"]
    if "fps" in settings:
        kwargs["frame_rate"] = settings["fps"]
    if "keypoint_noise_px" in settings:
        kwargs["keypoint_noise_px"] = settings["keypoint_noise_px"]
    if "height_mismatch" in settings:
        kwargs["height_mismatch"] = settings["height_mismatch"]
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as e:
        raise ConfigError(str(e))


def _method_reports(records, outputs) -> List:
    truth = [(r.t, r.gt_cb_m) for r in records if r.gt_cb_m is not None]
    series = {
        "keypoint": [
            (o.timestamp, o.monocular_cb) for o in outputs if o.monocular_cb is not None
        ],
        "depth": [(o.timestamp, o.depth_cb) for o in outputs if o.depth_cb is not None],
        "fused": [
            (o.timestamp, o.fused_cb) for o in outputs if o.fused_cb == o.fused_cb
        ],
    }
    reports = []
    for method, pairs in series.items():
        if pairs and truth:
            reports.append(compute_metrics(pairs, truth, method=method))
        else:
            reports.append(empty_report(method, len(truth)))
    return reports


def cmd_simulate(args) -> int:
    settings = _merged_settings(args)
    if "duration" in settings and settings["duration"] <= 0:
        raise ConfigError(f"duration must be positive, got {settings['duration']}")
    out_dir = settings.get("out")
    if out_dir is None:
        raise ConfigError("--out is required (flag or config file)")
    cfg = _scenario_config(settings)
    LOG.info(
        "simulating %s for %.1f s at %.0f fps, seed %d",
        cfg.kind.value, cfg.duration_s, cfg.frame_rate, cfg.seed,
    )
    stream = simulate_stream(cfg)
    outputs = run_fusion(stream.records)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_stream_csv(stream.records, out / "stream.csv")
    write_trace_csv(outputs, out / "trace.csv")
    write_metrics_json(_method_reports(stream.records, outputs), out / "metrics.json")
    write_plotdata_csv(stream.records, outputs, out / "plotdata.csv")
    LOG.info("wrote stream, trace, metrics and plot data to %s", out)
    if args.figures:
        from .plots import render_report

        for p in render_report(stream.records, outputs, out / "figures"):
            LOG.info("wrote %s", p)
    return 0


def cmd_replay(args) -> int:
    records = parse_sensor_log(args.log)
    if not records:
        raise ConfigError(f"{args.log} contains a header but no rows")
    outputs = run_fusion(records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(outputs, out / "trace.csv")
    has_truth = any(r.gt_cb_m is not None for r in records)
    if has_truth:
        write_metrics_json(_method_reports(records, outputs), out / "metrics.json")
    else:
        LOG.warning("log carries no ground truth, metrics skipped")
    if args.figures:
        from .plots import render_report

        for p in render_report(records, outputs, out / "figures"):
            LOG.info("wrote %s", p)
    return 0


def _configure_logging() -> None:
    raw = os.environ.get("DEPTHFUSE_LOG_LEVEL", "warn").strip().lower()
    level = _LOG_LEVELS.get(raw)
    if level is None:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if raw and raw not in _LOG_LEVELS:
        LOG.warning("unknown DEPTHFUSE_LOG_LEVEL %r, using warn", raw)


def main(argv: Optional[List[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_replay(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DepthFuseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
