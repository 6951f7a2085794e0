"""Downward energy flow in the H^1 metric.

Starting from random loops the flow decreases E monotonically and stops at
a critical point, whose energy is one of the values |lambda|^2 / 2.
"""
import numpy as np

from loopmoment import flow as F
from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import TorusVector

rng = np.random.default_rng(2)
print("critical values up to radius 3:", F.critical_values(3.1))

for i in range(4):
    g = L.random_loop(2, 1 + i % 2, rng, scale=2.0)
    tr = F.flow_down(g, M.Energy())
    cls = F.classify_critical(tr.final)
    print(f"run {i}: E {tr.values[0]:.4f} -> {tr.values[-1]:.2e} in {tr.steps} steps "
          f"({tr.status}), class {cls}")

# A tilted energy has a different minimum.
f = M.TiltedEnergy(TorusVector.from_chart([0.6]))
tr = F.flow_down(L.random_loop(2, 2, rng), f, F.FlowConfig(max_time=50))
print(f"\ntilted flow: f {tr.values[0]:.4f} -> {tr.values[-1]:.4f}, "
      f"final moment {M.moment(tr.final)}")
