"""Projecting onto a level set of the moment map.

The level mu = a is cut out by the functions h_j = <mu, xi_j> for an
admissible basis xi_j.  Each projection follows -grad h_j / |grad h_j|^2
until h_j hits its target; cycling through the j reaches the joint level.
"""
import numpy as np

from loopmoment import flow as F
from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import TorusVector

rng = np.random.default_rng(3)
g = L.random_loop(2, 2, rng)
mu = M.moment(g)
target = M.MomentValue(mu.p + TorusVector.from_chart([0.05]), mu.E + 0.05)

basis = F._basis_with_fallback(g, (0.9, 0.8, 0.7, 0.6, 0.3, 1e-3))
print("admissible basis:", basis.to_json())
print("start  ", mu)
print("target ", target)

res = F.project_to_joint_level(g, target, basis)
print(f"reached {M.moment(res.loop)} after {res.iterations} sweeps")
print("residual history:", ", ".join(f"{r:.1e}" for r in res.history))

# A short connectivity probe: sample the level and join samples by paths
# that are reprojected onto the level at every step.
probe = F.probe_connectivity(target, 2, 4, N=2, seed=0, resolution=16)
ok = sum(e.ok for e in probe.edges)
print(f"\nprobe: {len(probe.samples)} samples, {ok}/{len(probe.edges)} edges joined, "
      f"{probe.components} component(s)")
