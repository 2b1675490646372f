"""Agreement statistics against manual measurements, and stage benchmarks."""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

LOA_Z = 1.96

BENCH_ROWS = (
    ("phase symmetry", ("phasesym",)),
    ("morphological dilations", ("morphology",)),
    ("threshold and edge map", ("edge", "rdp")),
    ("Hough transform", ("hough",)),
    ("template matching", ("template",)),
)


@dataclass
class PairedMeasurements:
    auto: np.ndarray
    manual: np.ndarray

    def __post_init__(self):
        self.auto = np.asarray(self.auto, dtype=np.float64).ravel()
        self.manual = np.asarray(self.manual, dtype=np.float64).ravel()
        if self.auto.shape != self.manual.shape:
            raise ValueError("auto and manual lists differ in length")
        if len(self.auto) < 2:
            raise ValueError("need at least two pairs")
        if not (np.all(np.isfinite(self.auto)) and np.all(np.isfinite(self.manual))):
            raise ValueError("measurements must be finite")

    @property
    def diffs(self) -> np.ndarray:
        return self.auto - self.manual

    def __len__(self) -> int:
        return len(self.auto)


def accuracy_stats(p: PairedMeasurements) -> dict:
    """RMS and mean absolute error plus Bland-Altman 95% limits of agreement."""
    d = p.diffs
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    return {
        "n": len(d),
        "rms_mm": float(np.sqrt(np.mean(d * d))),
        "mae_mm": float(np.mean(np.abs(d))),
        "mean_diff_mm": mean,
        "sd_diff_mm": sd,
        "loa_low_mm": mean - LOA_Z * sd,
        "loa_high_mm": mean + LOA_Z * sd,
    }


def paired_t_test(p: PairedMeasurements) -> dict:
    """Two-sided paired t-test of auto against manual."""
    d = p.diffs
    n = len(d)
    sd = float(d.std(ddof=1))
    if sd == 0:
        raise ValueError("differences have zero variance")
    t = float(d.mean()) / (sd / math.sqrt(n))
    dof = n - 1
    return {"t_stat": t, "dof": dof, "p_value": float(min(1.0, 2.0 * stats.t.sf(abs(t), dof)))}


def chi_square_normality(d, bins: int = 8) -> dict:
    """Pearson goodness-of-fit of ``d`` to its fitted normal.

    Bins are equiprobable under N(mean, sd); two parameters are estimated,
    so ``dof = bins - 3``.
    """
    d = np.asarray(d, dtype=np.float64).ravel()
    if bins < 4:
        raise ValueError("need at least 4 bins for a positive dof")
    if len(d) < 5 * bins:
        raise ValueError(f"need at least {5 * bins} samples for {bins} bins")
    sd = float(d.std(ddof=1))
    if not sd > 0:
        raise ValueError("data have zero variance")
    edges = stats.norm.ppf(np.arange(1, bins) / bins, loc=float(d.mean()), scale=sd)
    observed = np.bincount(np.searchsorted(edges, d, side="right"), minlength=bins)
    expected = len(d) / bins
    chi2 = float(((observed - expected) ** 2).sum() / expected)
    dof = bins - 3
    return {"chi2": chi2, "dof": dof, "p_value": float(stats.chi2.sf(chi2, dof))}


def bland_altman_points(p: PairedMeasurements) -> np.ndarray:
    """Rows of (pair mean, auto - manual)."""
    return np.stack([(p.auto + p.manual) / 2.0, p.diffs], axis=1)


def write_bland_altman_csv(p: PairedMeasurements, path, ids=None) -> None:
    pts = bland_altman_points(p)
    ids = list(ids) if ids is not None else [str(i) for i in range(len(pts))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["image_id", "mean_mm", "diff_mm"])
        for i, (m, dd) in zip(ids, pts):
            w.writerow([i, f"{m:.6f}", f"{dd:.6f}"])


def format_accuracy_table(rows: dict[str, dict]) -> str:
    """Aligned text table: one line per method with RMS, MAE and LoA."""
    head = ("method", "RMS error (mm)", "Mean abs error (mm)", "95% limits of agreement (mm)")
    lines = []
    for name, s in rows.items():
        lines.append((name, f"{s['rms_mm']:.3f}", f"{s['mae_mm']:.3f}",
                      f"{s['loa_low_mm']:.3f} to {s['loa_high_mm']:.3f}"))
    widths = [max(len(r[i]) for r in [head] + lines) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*head), "  ".join("-" * w for w in widths)]
    out += [fmt.format(*r) for r in lines]
    return "\n".join(out)


# --------------------------------------------------------------------------
# evaluation of stored results

def read_manual_csv(path) -> dict[str, float]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "manual_mm"} <= set(reader.fieldnames):
            raise ValueError("manual CSV needs columns image_id, manual_mm")
        return {row["image_id"].strip(): float(row["manual_mm"]) for row in reader}


def evaluate_directory(results_dir, manual_csv, bins: int = 4) -> dict:
    """Pair every ok result JSON (id = file stem) with its manual depth."""
    manual = read_manual_csv(manual_csv)
    ids, auto, man, skipped = [], [], [], {}
    for f in sorted(Path(results_dir).glob("*.json")):
        res = json.loads(f.read_text())
        if isinstance(res, list):
            continue
        if res.get("status") != "ok" or res.get("depth_mm") is None:
            skipped[f.stem] = res.get("status", "unknown")
            continue
        if f.stem not in manual:
            skipped[f.stem] = "no manual measurement"
            continue
        ids.append(f.stem)
        auto.append(float(res["depth_mm"]))
        man.append(manual[f.stem])
    p = PairedMeasurements(auto, man)
    report = {"ids": ids, "accuracy": accuracy_stats(p), "skipped": skipped}
    try:
        report["t_test"] = paired_t_test(p)
    except ValueError as exc:
        report["t_test"] = {"error": str(exc)}
    try:
        report["normality"] = chi_square_normality(p.diffs, bins)
    except ValueError as exc:
        report["normality"] = {"error": str(exc)}
    report["pairs"] = p
    return report


# --------------------------------------------------------------------------
# benchmark

def _stage_times(result) -> dict[str, float]:
    if isinstance(result, dict):
        return result
    if result.status != "ok":
        raise RuntimeError(result.status)
    return result.timings


def _row_times(timings: dict[str, float]) -> dict[str, float]:
    rows = {name: sum(timings.get(k, 0.0) for k in keys) for name, keys in BENCH_ROWS}
    rows["total"] = sum(rows.values())
    return rows


def benchmark(methods, img, repeats: int = 5, cfg=None, denoise: bool = True) -> dict:
    """Median seconds per stage row and in total for each method.

    ``methods`` holds method names ("main", "alternative", "baseline") or
    ``(label, callable)`` pairs; a callable takes the image and returns a
    DetectionResult or a dict of stage timings.  Despeckling is shared
    preprocessing: it runs once up front and is not counted in any row.
    """
    from . import pipeline as pl

    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    cfg = cfg or pl.PipelineConfig()
    work = pl.despeckle_stage(np.asarray(img, dtype=np.float64), cfg) if denoise else img
    report = {"repeats": repeats, "methods": {}}
    for m in methods:
        if isinstance(m, str):
            label = m
            mcfg = cfg.replace(method=m)
            fn = lambda x, c=mcfg: pl.detect(x, c, denoise=False)  # noqa: E731
        else:
            label, fn = m
        runs, status = [], "ok"
        for _ in range(repeats):
            t0 = time.perf_counter()
            try:
                stages = _stage_times(fn(work))
            except RuntimeError as exc:
                status = str(exc)
                break
            wall = time.perf_counter() - t0
            rows = _row_times(stages)
            rows["wall"] = wall
            runs.append(rows)
        if status != "ok":
            report["methods"][label] = {"status": status}
            continue
        med = {k: statistics.median(r[k] for r in runs) for k in runs[0]}
        report["methods"][label] = {"status": "ok", "seconds": med}
    return report


def format_benchmark(report: dict) -> str:
    """Stage rows down, methods across, median seconds in each cell."""
    labels = list(report["methods"])
    names = [n for n, _ in BENCH_ROWS] + ["total"]
    cells = [["stage"] + labels]
    for n in names:
        row = [n]
        for lab in labels:
            m = report["methods"][lab]
            if m["status"] != "ok":
                row.append(m["status"])
            else:
                v = m["seconds"][n]
                row.append("-" if v == 0 and n != "total" else f"{v:.3f}")
        cells.append(row)
    widths = [max(len(r[i]) for r in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
