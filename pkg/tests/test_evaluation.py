import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laminascope.evaluation import (
    BENCH_ROWS,
    PairedMeasurements,
    accuracy_stats,
    bland_altman_points,
    benchmark,
    chi_square_normality,
    evaluate_directory,
    format_accuracy_table,
    format_benchmark,
    paired_t_test,
    write_bland_altman_csv,
)
from laminascope.pipeline import DetectionResult


def pairs_from_diffs(d, base=30.0):
    d = np.asarray(d, dtype=float)
    return PairedMeasurements(base + d, np.full(len(d), base))


diff_lists = st.lists(st.floats(-20, 20), min_size=2, max_size=40)


class TestAccuracy:
    def test_fixture(self):
        s = accuracy_stats(pairs_from_diffs([0.5, -0.3, 0.1], base=0.0))
        assert s["rms_mm"] == pytest.approx(math.sqrt(0.35 / 3), abs=1e-6)
        assert s["rms_mm"] == pytest.approx(0.3416, abs=1e-4)
        assert s["mae_mm"] == pytest.approx(0.3, abs=1e-6)
        assert s["mean_diff_mm"] == pytest.approx(0.1, abs=1e-6)
        assert s["sd_diff_mm"] == pytest.approx(0.4, abs=1e-6)
        assert s["loa_low_mm"] == pytest.approx(-0.684, abs=1e-6)
        assert s["loa_high_mm"] == pytest.approx(0.884, abs=1e-6)

    def test_exact_agreement(self):
        s = accuracy_stats(PairedMeasurements([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]))
        assert s["rms_mm"] == s["mae_mm"] == 0.0
        assert (s["loa_low_mm"], s["loa_high_mm"]) == (0.0, 0.0)

    @pytest.mark.parametrize("auto,manual", [([1.0], [1.0]), ([1, 2], [1, 2, 3]),
                                             ([1, np.nan], [1, 2])])
    def test_invalid(self, auto, manual):
        with pytest.raises(ValueError):
            PairedMeasurements(auto, manual)

    @settings(max_examples=200, deadline=None)
    @given(diff_lists)
    def test_properties(self, d):
        s = accuracy_stats(pairs_from_diffs(d))
        dd = np.asarray(d)
        tol = 1e-9 * (1 + np.abs(dd).max())
        assert s["mae_mm"] <= s["rms_mm"] + tol
        assert s["rms_mm"] >= abs(s["mean_diff_mm"]) - tol
        assert s["rms_mm"] <= np.abs(dd).max() + tol
        assert s["loa_low_mm"] <= s["mean_diff_mm"] <= s["loa_high_mm"]

    def test_table_formatting_fixture(self):
        row = {"rms_mm": 0.07, "mae_mm": 0.62, "loa_low_mm": -0.847, "loa_high_mm": 1.142}
        text = format_accuracy_table({"proposed": row})
        lines = text.splitlines()
        assert "RMS error (mm)" in lines[0] and "limits of agreement" in lines[0]
        assert lines[2].split()[:3] == ["proposed", "0.070", "0.620"]
        assert "-0.847 to 1.142" in lines[2]


class TestTTest:
    def test_fixture(self):
        r = paired_t_test(pairs_from_diffs([1, 1, 1, 1, -1]))
        assert r["t_stat"] == pytest.approx(1.5, abs=1e-6)
        assert r["dof"] == 4
        assert r["p_value"] == pytest.approx(0.2080, abs=5e-4)
        # closed form for dof 4: two-sided p = 1 - t (6 + t^2) / (4 + t^2)^1.5
        t = 1.5
        assert r["p_value"] == pytest.approx(1 - t * (6 + t * t) / (4 + t * t) ** 1.5, abs=1e-8)

    def test_symmetric(self):
        r = paired_t_test(pairs_from_diffs([-2.0, 2.0]))
        assert r["t_stat"] == 0.0 and r["p_value"] == 1.0

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            paired_t_test(pairs_from_diffs([0.0, 0.0, 0.0]))

    def test_dof1_closed_form(self):
        # Cauchy: p = 1 - 2 atan(|t|) / pi
        r = paired_t_test(pairs_from_diffs([1.0, 3.0]))
        assert r["t_stat"] == pytest.approx(2.0)
        assert r["p_value"] == pytest.approx(1 - 2 * math.atan(2.0) / math.pi, abs=1e-8)

    @settings(max_examples=100, deadline=None)
    @given(diff_lists)
    def test_range_and_symmetry(self, d):
        if np.std(d) < 1e-6:
            return
        a = paired_t_test(pairs_from_diffs(d))
        b = paired_t_test(pairs_from_diffs([-x for x in d]))
        assert 0 < a["p_value"] <= 1
        assert a["p_value"] == pytest.approx(b["p_value"], rel=1e-9, abs=1e-300)
        assert a["t_stat"] == pytest.approx(-b["t_stat"])


class TestNormality:
    def test_monte_carlo_normal(self):
        n_seeds = 2000
        passed = sum(
            chi_square_normality(np.random.default_rng(s).normal(0.3, 1.2, 1000), 8)["p_value"]
            > 0.01 for s in range(n_seeds))
        assert passed / n_seeds >= 0.99

    def test_uniform_rejected(self, rng):
        r = chi_square_normality(rng.uniform(0, 1, 1000), 8)
        assert r["p_value"] < 0.001
        assert r["dof"] == 5

    def test_hand_computed(self):
        # 4 equiprobable bins split at mean and mean +- 0.6745 sd
        d = np.array([-2, -1.5, -1, -0.9, -0.2, -0.1, 0.1, 0.2, 0.9, 1, 1.5, 2] * 2, float)
        r = chi_square_normality(d, 4)
        # counts are 8, 4, 4, 8 around an expected 6 each
        assert r["chi2"] == pytest.approx((4 + 4 + 4 + 4) / 6, abs=1e-9)
        assert r["dof"] == 1

    @pytest.mark.parametrize("d,bins", [(np.ones(100), 8), (np.arange(20.0), 8),
                                        (np.arange(100.0), 3)])
    def test_errors(self, d, bins):
        with pytest.raises(ValueError):
            chi_square_normality(d, bins)


class TestIO:
    def test_bland_altman(self, tmp_path):
        p = PairedMeasurements([10.0, 12.0], [11.0, 12.5])
        np.testing.assert_allclose(bland_altman_points(p), [[10.5, -1.0], [12.25, -0.5]])
        path = tmp_path / "ba.csv"
        write_bland_altman_csv(p, path, ["a", "b"])
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["image_id", "mean_mm", "diff_mm"]
        assert rows[1] == ["a", "10.500000", "-1.000000"]

    def test_evaluate_directory(self, tmp_path):
        rng = np.random.default_rng(0)
        manual = {}
        for i in range(24):
            auto = 30 + rng.normal(0, 1)
            manual[f"img{i:02d}"] = auto - rng.normal(0.1, 0.3)
            (tmp_path / f"img{i:02d}.json").write_text(
                json.dumps({"status": "ok", "depth_mm": auto}))
        (tmp_path / "bad.json").write_text(json.dumps({"status": "failed-threshold",
                                                       "depth_mm": None}))
        man = tmp_path / "manual.csv"
        man.write_text("image_id,manual_mm\n" + "".join(f"{k},{v}\n" for k, v in manual.items()))
        rep = evaluate_directory(tmp_path, man)
        assert rep["accuracy"]["n"] == 24
        assert rep["skipped"] == {"bad": "failed-threshold"}
        assert "p_value" in rep["t_test"] and "p_value" in rep["normality"]
        assert rep["accuracy"]["mae_mm"] <= rep["accuracy"]["rms_mm"]

    def test_manual_csv_columns(self, tmp_path):
        man = tmp_path / "m.csv"
        man.write_text("id,depth\nx,1\n")
        with pytest.raises(ValueError):
            evaluate_directory(tmp_path, man)


class TestBenchmark:
    def test_noop(self):
        rep = benchmark([("noop", lambda img: {})], np.zeros((8, 8)), repeats=3, denoise=False)
        secs = rep["methods"]["noop"]["seconds"]
        assert all(v == 0.0 for k, v in secs.items() if k != "wall")
        assert 0.0 <= secs["wall"] < 0.01

    def test_rows_and_total(self):
        fake = {"phasesym": 0.2, "morphology": 0.1, "edge": 0.05, "rdp": 0.02, "hough": 0.3}
        rep = benchmark([("fake", lambda img: dict(fake))], np.zeros((8, 8)), repeats=3,
                        denoise=False)
        secs = rep["methods"]["fake"]["seconds"]
        assert secs["threshold and edge map"] == pytest.approx(0.07)
        assert secs["total"] == pytest.approx(0.67)
        assert secs["total"] >= max(v for k, v in secs.items() if k not in ("total", "wall"))
        text = format_benchmark(rep)
        assert [ln.split("  ")[0].strip() for ln in text.splitlines()[2:]] == \
            [n for n, _ in BENCH_ROWS] + ["total"]

    def test_failure_status(self):
        rep = benchmark([("bad", lambda img: DetectionResult("main", "failed-threshold"))],
                        np.zeros((8, 8)), repeats=3, denoise=False)
        assert rep["methods"]["bad"] == {"status": "failed-threshold"}
        assert "failed-threshold" in format_benchmark(rep)

    def test_repeats_floor(self):
        with pytest.raises(ValueError):
            benchmark(["main"], np.zeros((64, 64)), repeats=2)

    def test_real_methods_ordering(self, canonical):
        rep = benchmark(["main", "alternative", "baseline"], canonical[0], repeats=3)
        tot = {k: v["seconds"]["total"] for k, v in rep["methods"].items()}
        assert all(v["status"] == "ok" for v in rep["methods"].values())
        assert tot["main"] < tot["alternative"] < tot["baseline"]
