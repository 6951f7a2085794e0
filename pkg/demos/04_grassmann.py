"""The Grassmannian model of order-n loops.

A loop gamma of order n gives the plane gamma H_+ / z^n H_+ of dimension nN
in a space of dimension 2nN.  Its weight moment map, calibrated at two
anchor loops, reproduces (p, E).  Torus fixed points are coordinate planes.
"""
import numpy as np

from loopmoment import grassmann as G
from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import LatticeVector, TorusVector

rng = np.random.default_rng(4)

lam = L.lattice_loop(LatticeVector([1, -1]))
P = G.embed(lam, 1)
print("lambda_1: Plücker support", G.pluecker(P).support(), "legend", G.legend(1, 2))
print("grass moment", G.grass_moment(P), " loop moment", M.moment(lam))

g = L.random_loop(2, 2, rng)
P = G.embed(g)
print(f"\nrandom loop: diagram residual {G.diagram_residual(g):.1e}, "
      f"trace vs minors {G.grass_moment(P).distance(G.grass_moment(P, 'pluecker')):.1e}")

# Flowing along a complex torus direction ends at a fixed point.
xi = M.CovectorTR(TorusVector.from_chart([0.3]), 1.0)
for t in (0.0, 2.0, 10.0, 100.0):
    Q = G.torus_orbit_flow(P, xi, t)
    print(f"t={t:6.1f}  <mu, xi> = {M.pair(G.grass_moment(Q), xi):.6f}  fixed: {G.is_fixed_point(Q, 1e-8)}")
