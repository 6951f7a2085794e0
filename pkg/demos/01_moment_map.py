"""The moment map of a based loop in SU(2).

A loop is stored by its Fourier coefficients.  Its moment value is the pair
(p, E): the torus part p and the energy E.  Lattice loops sit at the
vertices (m, m^2) of the image; a random loop lands strictly inside.
"""
import numpy as np

from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import LatticeVector, TorusVector

rng = np.random.default_rng(1)

for m in range(-2, 3):
    lam = L.lattice_loop(LatticeVector([m, -m]))
    mu = M.moment(lam)
    print(f"lattice loop m={m:+d}: p={mu.p.chart[0]:+.3f}  E={mu.E:.3f}")

g = L.random_loop(2, 2, rng)
mu = M.moment(g)
print(f"\nrandom order-2 loop: p={mu.p.chart[0]:+.6f}  E={mu.E:.6f}")

# The closed Fourier forms agree with quadrature on the fine grid.
print("Fourier vs quadrature:", M.moment_fourier(g).distance(mu))

# Rotating the loop or conjugating by the torus leaves the value unchanged.
t = np.diag(np.exp(1j * np.array([0.7, -0.7])))
print("after rotate:", M.moment(L.rotate(g, 1.9)).distance(mu))
print("after conjugate:", M.moment(L.conjugate(g, t)).distance(mu))

# The tilted energy is the energy shifted by the pairing with rho.
rho = TorusVector.from_chart([0.4])
lhs = M.tilted_energy(g, rho)
rhs = M.pair(mu, M.CovectorTR(rho)) + 0.5 * rho.norm_sq()
print(f"tilted energy {lhs:.12f}  pairing + |rho|^2/2 {rhs:.12f}")
