"""Hamiltonian geometry of truncated based loop groups of SU(N).

Modules
-------
liegroup     su(N), the maximal torus, roots, the integer lattice.
loops        algebraic loops as Fourier series, actions, H^1 norms, retraction.
moment       the moment map (p, E), tilted energy, symplectic form, H^1 gradients.
flow         gradient flows, level projections, admissible bases, connectivity probe.
grassmann    the finite Grassmannian model and its weight moment map.
experiments  image sampling, hull checks, data files, the acceptance suite.
"""
from .liegroup import LatticeVector, TorusVector, inner, project_t
from .loops import AlgebraicLoop, FreeLoop, LoopTangent, lattice_loop, retract
from .moment import CovectorTR, MomentValue, energy, t_moment, tilted_energy

__version__ = "0.1.0"

__all__ = [
    "AlgebraicLoop", "CovectorTR", "FreeLoop", "LatticeVector", "LoopTangent", "MomentValue",
    "TorusVector", "energy", "inner", "lattice_loop", "project_t", "retract",
    "t_moment", "tilted_energy",
]
