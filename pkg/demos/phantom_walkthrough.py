"""Render a few phantoms, run the main detector, and compare with truth.

Run:  python3 demos/phantom_walkthrough.py [out_dir]
"""

import sys
from pathlib import Path

from laminascope import phantom
from laminascope.imagecore import save_image
from laminascope.pipeline import detect, save_overlay

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
out.mkdir(exist_ok=True)

print(f"{'seed':>4} {'sigma':>6} {'truth':>6} {'found':>6} {'mm':>7}  status")
for seed, sigma in enumerate([0.0, 0.1, 0.2, 0.3]):
    img, truth = phantom.canonical(seed=seed, speckle_sigma=sigma)
    res = detect(img)
    save_image(img, out / f"phantom_{seed}.png")
    save_overlay(img, res, out / f"overlay_{seed}.png")
    depth = f"{res.depth_px:6.1f}" if res.ok else "     -"
    mm = f"{res.depth_mm:7.2f}" if res.ok else "      -"
    print(f"{seed:4d} {sigma:6.2f} {truth.depth_px:6.1f} {depth} {mm}  {res.status}")

# Three laminae: the lowermost one marks the epidural window.
L = phantom.LaminaSpec
spec = phantom.PhantomSpec(laminae=[L((150, 30), length=70), L((190, 120), length=70),
                                    L((150, 200), length=70)], seed=3)
img, truth = phantom.render(spec)
res = detect(img)
print("three laminae, lower endpoints (row, col):", truth.lower_endpoints)
x, y = res.chosen.lower_endpoint
print(f"chosen lower endpoint: row {y}, col {x}")
save_overlay(img, res, out / "overlay_three.png")
print("images written to", out.resolve())
