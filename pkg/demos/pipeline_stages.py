"""Step through the main pipeline stage by stage on the canonical phantom
and save each intermediate image.

Run:  python3 demos/pipeline_stages.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from laminascope import phantom
from laminascope.contours import rasterize, rdp_simplify, trace_contours
from laminascope.edgemap import edge_map
from laminascope.hough import extract_segments, find_peaks, hough_vote
from laminascope.imagecore import save_image
from laminascope.morphology import double_dilate, threshold_and_erode
from laminascope.pipeline import PipelineConfig, despeckle_stage, select_lowermost

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)
cfg = PipelineConfig()

img, truth = phantom.canonical(seed=0)
clean = despeckle_stage(img, cfg)
print(f"speckle variance in the top-left corner: {img[:64, :64].var():.2e} -> "
      f"{clean[:64, :64].var():.2e}")

dilated = double_dilate(clean, cfg.morphology)
binary, level = threshold_and_erode(dilated, cfg.morphology)
print(f"Otsu level {level:.3f}, {binary.sum()} foreground pixels")

edges = edge_map(binary, cfg.edge_frac)
lines = [rdp_simplify(c, cfg.rdp_epsilon) for c in trace_contours(edges, cfg.min_contour_points)]
points = rasterize(lines, edges.shape)
print(f"{edges.sum()} edge pixels, {len(lines)} contours, {len(points)} points after RDP")

acc = hough_vote(points, cfg.hough)
peaks = find_peaks(acc, cfg.hough)
segs = extract_segments(points, peaks, cfg.hough)
chosen = select_lowermost(segs, cfg)
print("top peaks (rho, theta, votes):", [(float(p.rho), p.theta, p.votes) for p in peaks[:3]])
x, y = chosen.lower_endpoint
print(f"chosen segment theta {chosen.theta:g}, lower endpoint row {y} col {x}, truth row {truth.depth_px:g}")

for name, arr in [("0_input", img), ("1_cwd", clean), ("2_dilated", dilated), ("3_binary", binary),
                  ("4_edges", edges), ("5_hough", acc.to_image())]:
    a = np.asarray(arr, dtype=float)
    save_image(a / a.max() if a.max() > 0 else a, out / f"stage_{name}.png")
print("stage images written to", out.resolve())
