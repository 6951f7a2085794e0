"""The SU(2) moment image is the convex hull of the points (m, m^2).

Samples random order-2 loops, checks every value against the hull facets
and writes plot-ready CSV files into ./figure1.
"""
import sys

from loopmoment import experiments as X

count = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
values, failures = X.sample_image(2, 2, count, seed=5)
rep = X.hull_report(values)
print(f"{len(values)} samples, {failures} resampled, {rep.violations} hull violations, "
      f"min margin {rep.min_margin:.3e}")

counts = X.emit_figure1(radius=2, resolution=50, out="figure1", samples=count, seed=5)
for name, rows in counts.items():
    print(f"figure1/{name}: {rows} rows")
