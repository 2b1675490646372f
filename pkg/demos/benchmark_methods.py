"""Time the three detection methods stage by stage on the canonical phantom.

Run:  python3 demos/benchmark_methods.py [repeats]
"""

import sys

from laminascope import phantom
from laminascope.evaluation import benchmark, format_benchmark

repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 5
img, _ = phantom.canonical()
rep = benchmark(["main", "alternative", "baseline"], img, repeats=repeats)
print(format_benchmark(rep))
tot = {k: v["seconds"]["total"] for k, v in rep["methods"].items()}
print(f"\nbaseline is {tot['baseline'] / tot['main']:.1f}x slower than main, "
      f"alternative {tot['alternative'] / tot['main']:.1f}x")
