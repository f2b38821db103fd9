"""End-to-end acceptance suite.

One test per criterion, each printing a single pass/fail line with the
measured numbers (visible under ``pytest -s``, and in the failure report
otherwise).  Stated runtime budgets are asserted, not just aspired to.
"""

import math
import time
from pathlib import Path

import numpy as np

from ekf_oracle import oracle_correct, oracle_predict
from depthfuse.cli import main
from depthfuse.fusion import FilterState, NoiseConfig, ekf_correct, ekf_predict, run_fusion
from depthfuse.metrics import compute_metrics
from depthfuse.monocular import monocular_cb_estimate
from depthfuse.simulate import (
    DepthNoiseModel,
    OutlierInjection,
    Scenario,
    ScenarioConfig,
    simulate_stream,
)

# Reference per-method accuracy rows (mean |e|, RMSE, std), in cm, for the
# stepped, sinusoidal and lateral recordings.
REFERENCE_ROWS = [
    ("stepped/keypoint", 10.45, 20.24, 17.34),
    ("stepped/depth", 13.01, 34.35, 31.79),
    ("stepped/fused", 0.83, 17.16, 17.14),
    ("sinusoidal/keypoint", 9.68, 20.41, 17.97),
    ("sinusoidal/depth", 8.55, 26.80, 25.40),
    ("sinusoidal/fused", 6.02, 21.48, 20.61),
    ("lateral/keypoint", 4.09, 22.90, 22.53),
    ("lateral/depth", 7.22, 30.80, 29.94),
    ("lateral/fused", 0.61, 20.07, 20.06),
]


def _verdict(n, ok, detail, budget_s, elapsed):
    line = (
        f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; "
        f"{elapsed:.2f} s of {budget_s:g} s budget)"
    )
    print(line)
    assert ok, line
    assert elapsed < budget_s, line


def _series(stream, outputs):
    truth = [(r.t, r.gt_cb_m) for r in stream.records]
    methods = {
        "keypoint": [
            (o.timestamp, o.monocular_cb) for o in outputs if o.monocular_cb is not None
        ],
        "depth": [(o.timestamp, o.depth_cb) for o in outputs if o.depth_cb is not None],
        "fused": [
            (o.timestamp, o.fused_cb)
            for o in outputs
            if math.isfinite(o.fused_cb)
        ],
    }
    return truth, methods


def test_criterion_1_reference_metric_identity():
    start = time.perf_counter()
    worst = 0.0
    for name, mean_abs, rmse, std in REFERENCE_ROWS:
        recomputed = math.sqrt(mean_abs**2 + std**2)
        rel = abs(recomputed - rmse) / rmse
        worst = max(worst, rel)
    elapsed = time.perf_counter() - start
    _verdict(
        1,
        worst <= 0.005,
        f"9 rows, worst sqrt(mean^2+std^2) vs RMSE deviation {worst * 100:.3f}%",
        1.0,
        elapsed,
    )


def test_criterion_2_model_hand_values():
    start = time.perf_counter()
    v190 = monocular_cb_estimate(190.0)
    v250 = monocular_cb_estimate(250.0)
    seam = monocular_cb_estimate(200.0 - 1e-9) - monocular_cb_estimate(200.0)
    ok = (
        abs(v190 - 287.60) <= 0.01
        and abs(v250 - 181.12) <= 0.01
        and 6.0 <= seam <= 7.0
    )
    elapsed = time.perf_counter() - start
    _verdict(
        2,
        ok,
        f"f(190)={v190:.4f} cm, f(250)={v250:.4f} cm, seam={seam:.4f} cm",
        1.0,
        elapsed,
    )


def test_criterion_3_ekf_oracle_equivalence():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    noise = NoiseConfig()
    state = FilterState(p=4.0, p_dot=0.0, P=np.diag([0.25, 1.0]))
    x = np.array([4.0, 0.0])
    P = np.diag([0.25, 1.0])
    worst = 0.0
    for k in range(1000):
        dt = float(rng.uniform(0.01, 0.2))
        state = ekf_predict(state, dt, noise)
        x, P = oracle_predict(x, P, dt, noise.sigma_p_sq, noise.sigma_pdot_sq)
        z = 4.0 + 1.5 * math.sin(0.013 * k) + float(rng.normal(0.0, 0.25))
        z = max(0.5, z)
        state = ekf_correct(state, z, noise)
        x, P = oracle_correct(x, P, z, noise.sigma_z_sq)
        worst = max(
            worst,
            abs(state.p - x[0]),
            abs(state.p_dot - x[1]),
            float(np.abs(state.P - P).max()),
        )
    elapsed = time.perf_counter() - start
    _verdict(
        3,
        worst <= 1e-10,
        f"1000 cycles, worst state/covariance deviation {worst:.2e}",
        1.0,
        elapsed,
    )


def test_criterion_4_fused_bias_dominance():
    start = time.perf_counter()
    scenarios = [
        (Scenario.DISCRETE_FWD_BACK, 50.0, "discrete"),
        (Scenario.CONTINUOUS_FWD_BACK, 40.0, "continuous"),
        (Scenario.LATERAL_SWEEP, 40.0, "lateral"),
    ]
    wins = {}
    for kind, duration, label in scenarios:
        count = 0
        for seed in range(20):
            cfg = ScenarioConfig(kind=kind, duration_s=duration, seed=seed)
            stream = simulate_stream(cfg)
            outputs = run_fusion(stream.records)
            truth, methods = _series(stream, outputs)
            bias = {
                name: compute_metrics(pairs, truth, method=name).mean_abs_err_cm
                for name, pairs in methods.items()
            }
            if bias["fused"] < bias["keypoint"] and bias["fused"] < bias["depth"]:
                count += 1
        wins[label] = count
    elapsed = time.perf_counter() - start
    ok = all(count >= 18 for count in wins.values())
    detail = ", ".join(f"{k} {v}/20" for k, v in wins.items())
    _verdict(4, ok, f"fused lowest |mean err| in {detail}", 30.0, elapsed)


def test_criterion_5_outlier_gate_efficacy():
    start = time.perf_counter()
    cfg = ScenarioConfig(
        kind=Scenario.LATERAL_SWEEP,
        duration_s=20.0,
        seed=12,
        keypoint_noise_px=0.0,
        depth_noise=DepthNoiseModel(base_sigma=0.0),
        outliers=OutlierInjection(),  # defaults, magnitude_sigma = 1.0
    )
    stream = simulate_stream(cfg)
    outputs = run_fusion(stream.records)
    worst_fused = 0.0
    injected = 0
    min_injected_dev = math.inf
    for rec, out, flagged in zip(stream.records, outputs, stream.outlier_flags):
        worst_fused = max(worst_fused, abs(out.fused_cb - rec.gt_cb_m))
        if flagged:
            injected += 1
            min_injected_dev = min(min_injected_dev, abs(rec.depth_cb_m - rec.gt_cb_m))
    elapsed = time.perf_counter() - start
    ok = injected > 0 and worst_fused <= 0.15 and min_injected_dev > 0.5
    _verdict(
        5,
        ok,
        f"{injected} injected frames, worst fused deviation {worst_fused:.4f} m, "
        f"smallest injected depth deviation {min_injected_dev:.3f} m",
        1.0,
        elapsed,
    )


def test_criterion_6_far_range_extension():
    start = time.perf_counter()
    wins = 0
    for seed in range(20):
        cfg = ScenarioConfig(
            kind=Scenario.CONTINUOUS_FWD_BACK,
            duration_s=30.0,
            seed=seed,
            mean_distance=4.25,
            sweep_amplitude=2.75,  # sweeps 1.5 m out to 7 m
        )
        stream = simulate_stream(cfg)
        outputs = run_fusion(stream.records)
        fused_sq, depth_sq = [], []
        for rec, out in zip(stream.records, outputs):
            if rec.gt_cb_m > 4.0:
                if math.isfinite(out.fused_cb):
                    fused_sq.append((out.fused_cb - rec.gt_cb_m) ** 2)
                if out.depth_cb is not None:
                    depth_sq.append((out.depth_cb - rec.gt_cb_m) ** 2)
        fused_rmse = math.sqrt(sum(fused_sq) / len(fused_sq))
        depth_rmse = math.sqrt(sum(depth_sq) / len(depth_sq))
        if fused_rmse < depth_rmse:
            wins += 1
    elapsed = time.perf_counter() - start
    _verdict(
        6,
        wins >= 18,
        f"fused beats raw depth beyond 4 m in {wins}/20 seeds",
        10.0,
        elapsed,
    )


def test_criterion_7_covariance_health():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    noise = NoiseConfig()
    state = FilterState(p=4.0, p_dot=0.0, P=np.diag([0.25, 1.0]))
    worst_asym = 0.0
    min_eig = math.inf
    for k in range(100_000):
        state = ekf_predict(state, float(rng.uniform(0.005, 0.3)), noise)
        if rng.random() < 0.7:
            z = max(0.05, state.p + float(rng.normal(0.0, 0.4)))
            state = ekf_correct(state, z, noise)
        P = state.P
        asym = abs(float(P[0, 1]) - float(P[1, 0]))
        worst_asym = max(worst_asym, asym)
        if not (
            math.isfinite(state.p)
            and math.isfinite(state.p_dot)
            and np.all(np.isfinite(P))
        ):
            worst_asym = math.inf
            break
        if k % 1000 == 0:
            min_eig = min(min_eig, float(np.linalg.eigvalsh(P).min()))
    min_eig = min(min_eig, float(np.linalg.eigvalsh(state.P).min()))
    elapsed = time.perf_counter() - start
    ok = worst_asym <= 1e-9 and min_eig >= -1e-12
    _verdict(
        7,
        ok,
        f"1e5 steps, worst asymmetry {worst_asym:.1e}, "
        f"smallest eigenvalue {min_eig:.3e}",
        5.0,
        elapsed,
    )


def test_criterion_8_determinism_and_closure(tmp_path):
    start = time.perf_counter()
    args = ["simulate", "--scenario", "continuous", "--seed", "17", "--duration", "6"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    names = ("stream.csv", "trace.csv", "metrics.json", "plotdata.csv")
    identical = all((a / n).read_bytes() == (b / n).read_bytes() for n in names)

    replay_out = tmp_path / "replayed"
    rc = main(["replay", "--log", str(a / "stream.csv"), "--out", str(replay_out)])
    closure = (
        rc == 0
        and (replay_out / "trace.csv").read_bytes() == (a / "trace.csv").read_bytes()
        and (replay_out / "metrics.json").read_bytes()
        == (a / "metrics.json").read_bytes()
    )
    elapsed = time.perf_counter() - start
    _verdict(
        8,
        identical and closure,
        f"repeat-run outputs byte-identical: {identical}, "
        f"replay reproduces trace and metrics: {closure}",
        5.0,
        elapsed,
    )
