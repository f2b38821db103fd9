import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthfuse.metrics import MetricsReport, compute_metrics, empty_report


def paired(errors_m, dt=1.0):
    """Truth at 3.0 m with estimates offset by the given errors."""
    truth = [(i * dt, 3.0) for i in range(len(errors_m))]
    est = [(i * dt, 3.0 + e) for i, e in enumerate(errors_m)]
    return est, truth


class TestBasicStats:
    def test_perfect_estimates(self):
        est, truth = paired([0.0, 0.0, 0.0])
        r = compute_metrics(est, truth, method="perfect")
        assert r.method == "perfect"
        assert r.mean_abs_err_cm == 0.0
        assert r.rmse_cm == 0.0
        assert r.std_cm == 0.0
        assert r.n_frames == 3
        assert r.n_excluded == 0

    def test_alternating_error_has_zero_mean(self):
        est, truth = paired([0.01, -0.01, 0.01, -0.01])
        r = compute_metrics(est, truth)
        assert r.mean_abs_err_cm == pytest.approx(0.0, abs=1e-12)
        assert r.rmse_cm == pytest.approx(1.0, abs=1e-12)
        assert r.std_cm == pytest.approx(1.0, abs=1e-12)

    def test_pure_offset_is_all_bias(self):
        est, truth = paired([0.02, 0.02, 0.02])
        r = compute_metrics(est, truth)
        assert r.mean_abs_err_cm == pytest.approx(2.0)
        assert r.rmse_cm == pytest.approx(2.0)
        assert r.std_cm == pytest.approx(0.0, abs=1e-12)

    def test_signed_mean_not_mean_absolute(self):
        # mean of |e| would be 1.5 cm here; the signed mean is 0.5 cm
        est, truth = paired([0.02, -0.01])
        r = compute_metrics(est, truth)
        assert r.mean_abs_err_cm == pytest.approx(0.5)

    def test_population_std(self):
        est, truth = paired([0.00, 0.02])
        r = compute_metrics(est, truth)
        # ddof=0: std of [0, 2] cm about its mean of 1
        assert r.std_cm == pytest.approx(1.0)

    @given(
        errors=st.lists(
            st.floats(-0.5, 0.5, allow_nan=False), min_size=2, max_size=40
        )
    )
    @settings(max_examples=200)
    def test_identity_and_ordering(self, errors):
        est, truth = paired(errors)
        r = compute_metrics(est, truth)
        assert r.rmse_cm**2 == pytest.approx(
            r.mean_abs_err_cm**2 + r.std_cm**2, abs=1e-9
        )
        assert r.rmse_cm >= r.mean_abs_err_cm - 1e-12

    def test_shift_moves_bias_not_std(self):
        base = [0.003, -0.004, 0.001, 0.002]
        est_a, truth = paired(base)
        est_b, _ = paired([e + 0.05 for e in base])
        a = compute_metrics(est_a, truth)
        b = compute_metrics(est_b, truth)
        assert b.std_cm == pytest.approx(a.std_cm, abs=1e-9)
        assert b.mean_abs_err_cm == pytest.approx(a.mean_abs_err_cm + 5.0, abs=1e-9)


class TestAssociation:
    def test_jittered_timestamps_still_pair(self):
        truth = [(0.0, 3.0), (1.0, 3.0), (2.0, 3.0)]
        est = [(0.1, 3.01), (0.9, 3.01), (2.2, 3.01)]
        r = compute_metrics(est, truth)
        assert r.n_frames == 3
        assert r.n_excluded == 0

    def test_unmatched_truth_is_excluded(self):
        truth = [(0.0, 3.0), (1.0, 3.0), (2.0, 3.0), (3.0, 3.0)]
        est = [(0.0, 3.0), (3.0, 3.0)]  # nothing near t=1 or t=2
        r = compute_metrics(est, truth)
        assert r.n_frames == 2
        assert r.n_excluded == 2

    def test_unmatched_estimates_are_excluded(self):
        truth = [(0.0, 3.0), (1.0, 3.0)]
        est = [(0.0, 3.0), (0.4, 9.9), (0.6, 9.9), (1.0, 3.0)]
        r = compute_metrics(est, truth)
        assert r.n_frames == 2
        assert r.n_excluded == 2

    def test_explicit_frame_period(self):
        truth = [(0.0, 3.0), (10.0, 3.0)]
        est = [(0.4, 3.0), (10.0, 3.0)]
        tight = compute_metrics(est, truth, frame_period=0.5)
        assert tight.n_frames == 1  # 0.4 misses the +-0.25 window
        loose = compute_metrics(est, truth, frame_period=2.0)
        assert loose.n_frames == 2

    def test_single_truth_single_estimate(self):
        r = compute_metrics([(5.0, 3.1)], [(0.0, 3.0)])
        # no spacing to infer, so the lone pair is taken
        assert r.n_frames == 1
        assert r.mean_abs_err_cm == pytest.approx(10.0)


class TestEdgesAndSerialization:
    def test_empty_truth_raises(self):
        with pytest.raises(ValueError):
            compute_metrics([(0.0, 3.0)], [])

    def test_empty_estimates_raises(self):
        with pytest.raises(ValueError):
            compute_metrics([], [(0.0, 3.0)])

    def test_nothing_in_reach_raises(self):
        with pytest.raises(ValueError):
            compute_metrics([(100.0, 3.0)], [(0.0, 3.0), (1.0, 3.0)])

    def test_as_dict_field_names(self):
        est, truth = paired([0.01, 0.01])
        d = compute_metrics(est, truth, method="depth").as_dict()
        assert list(d.keys()) == [
            "method",
            "mean_abs_err_cm",
            "rmse_cm",
            "std_cm",
            "n_frames",
            "n_excluded",
        ]
        assert d["method"] == "depth"

    def test_empty_report(self):
        r = empty_report("keypoint", 120)
        assert r.n_frames == 0
        assert r.n_excluded == 120
        assert r.mean_abs_err_cm is None
        assert r.rmse_cm is None
        assert r.std_cm is None
        assert isinstance(r, MetricsReport)
        assert r.as_dict()["rmse_cm"] is None
