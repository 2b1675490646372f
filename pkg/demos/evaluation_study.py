"""A small agreement study: detect on seeded phantoms, treat the rendered
truth plus simulated reader jitter as the manual measurement, and report
accuracy, Bland-Altman limits, a paired t-test and a normality check.

Run:  python3 demos/evaluation_study.py [out_dir]
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

from laminascope import phantom
from laminascope.evaluation import evaluate_directory, format_accuracy_table
from laminascope.pipeline import PipelineConfig, detect

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "study"
out.mkdir(parents=True, exist_ok=True)
cfg = PipelineConfig()
jitter = np.random.default_rng(0)

rows = []
for seed in range(24):
    row = 165 + seed % 5 * 8
    spec = phantom.PhantomSpec(laminae=[phantom.LaminaSpec((row, 120))],
                               speckle_sigma=0.1 + 0.01 * seed, seed=seed)
    img, truth = phantom.render(spec)
    res = detect(img, cfg)
    (out / f"case{seed:02d}.json").write_text(res.to_json())
    manual = truth.depth_px * cfg.mm_per_px + jitter.normal(0, 0.2)
    rows.append((f"case{seed:02d}", f"{manual:.3f}"))

manual_csv = out / "manual.csv"
with manual_csv.open("w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["image_id", "manual_mm"])
    w.writerows(rows)

rep = evaluate_directory(out, manual_csv)
print(format_accuracy_table({"main": rep["accuracy"]}))
print("paired t-test:", json.dumps(rep["t_test"]))
print("normality:", json.dumps(rep["normality"]))
if rep["skipped"]:
    print("skipped:", rep["skipped"])
