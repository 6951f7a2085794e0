"""Moment map of the T x S^1 action on based loops and H^1 gradients.

``mu(gamma) = (p(gamma), E(gamma))`` with

* ``E = (1/4 pi) int |gamma^-1 gamma'|^2``, the energy (rotation moment), and
* ``p = pr_t (1/2 pi) int gamma' gamma^-1``, the torus moment.

The torus component uses the right logarithmic derivative: it is the one
invariant under ``theta -> gamma(s + theta) gamma(s)^-1`` and the one pulled
back from the Grassmannian weights of ``gamma H_+``.

Gradients live in chart coordinates at a loop ``gamma``: a based tangent
series ``eta`` of the loop's order is sent to ``retract(gamma + gamma*eta)``.
The differential of that chart at zero is computed in closed form
(:func:`chart_differential`), so differentials of the moment components are
exact; the H^1 Gram of the chart coordinates turns them into gradients.
"""
from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np
import scipy.linalg

from . import loops as L
from .liegroup import TorusVector


class GradientError(ArithmeticError):
    pass


@dataclasses.dataclass(frozen=True)
class MomentValue:
    p: TorusVector
    E: float

    def distance(self, other: "MomentValue") -> float:
        return float(np.sqrt((self.p - other.p).norm_sq() + (self.E - other.E) ** 2))

    def __sub__(self, other: "MomentValue") -> "MomentValue":
        return MomentValue(self.p - other.p, self.E - other.E)

    def __add__(self, other: "MomentValue") -> "MomentValue":
        return MomentValue(self.p + other.p, self.E + other.E)

    def to_json(self) -> dict:
        return {"p": list(self.p.chart), "E": self.E}

    @classmethod
    def from_json(cls, data: dict, N: int):
        return cls(TorusVector.from_chart(data["p"]), float(data["E"]))


@dataclasses.dataclass(frozen=True)
class CovectorTR:
    """Element ``(rho, tau)`` of t + R."""
    rho: TorusVector
    tau: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.append(self.rho.array()[:-1], self.tau)


# -- values ---------------------------------------------------------------

def right_log_derivative(loop: L.FreeLoop, m: int | None = None) -> np.ndarray:
    """Samples of ``gamma' gamma^-1`` on the quadrature grid."""
    g = loop.samples(m)
    dg = loop.derivative_samples(m)
    return np.swapaxes(np.linalg.solve(np.swapaxes(g, 1, 2), np.swapaxes(dg, 1, 2)), 1, 2)


def _sq(u: np.ndarray) -> np.ndarray:
    """Pointwise ``-tr(u u)`` for a stack of matrices."""
    return -np.einsum("sij,sji->s", u, u).real


def energy(loop: L.FreeLoop) -> float:
    u = L.log_derivative(loop)
    return float(np.mean(_sq(u)) / 2)


def t_moment(loop: L.FreeLoop) -> TorusVector:
    v = right_log_derivative(loop)
    d = np.mean(np.diagonal(v, axis1=1, axis2=2).imag, axis=0)
    return TorusVector(d - d.mean())


def moment(loop: L.FreeLoop) -> MomentValue:
    return MomentValue(t_moment(loop), energy(loop))


def pair(mu: MomentValue, xi: CovectorTR) -> float:
    return mu.p.dot(xi.rho) + xi.tau * mu.E


def tilted_energy(loop: L.FreeLoop, rho: TorusVector) -> float:
    """``(1/4 pi) int |gamma' gamma^-1 + rho|^2``."""
    v = right_log_derivative(loop) + rho.matrix()[None]
    return float(np.mean(_sq(v)) / 2)


def moment_fourier(loop: L.FreeLoop) -> MomentValue:
    """Moment map from the coefficients alone, valid for group-valued loops.

    ``E = (1/2) sum k^2 |A_k|^2`` and ``p_j = sum_k k |row_j(A_k)|^2``.
    """
    c = loop.coeffs
    k = np.arange(-loop.order, loop.order + 1)
    e = 0.5 * float(np.sum(k ** 2 * np.sum(np.abs(c) ** 2, axis=(1, 2))))
    rows = np.sum(np.abs(c) ** 2, axis=2)                       # (2n+1, N)
    p = k @ rows
    return MomentValue(TorusVector(p - p.mean()), e)


def symplectic_form(xi: L.LoopTangent, eta: L.LoopTangent) -> float:
    """``omega(xi, eta) = (1/2 pi) int (xi', eta)`` for left-trivialized tangents."""
    if xi.base is not eta.base:
        raise ValueError("tangents are attached to different base loops")
    n = max(xi.order, eta.order)
    m = L.grid_size(n)
    dx = L.synthesize(L.pad(xi.derivative_coeffs(), n), m)
    y = L.synthesize(L.pad(eta.coeffs, n), m)
    return float(np.mean(-np.einsum("sij,sji->s", dx, y).real))


# -- raw gradients in real coefficient coordinates -------------------------

def _real_coords(c: np.ndarray) -> np.ndarray:
    flat = c.reshape(-1)
    return np.concatenate([flat.real, flat.imag])


def energy_raw_gradient(loop: L.FreeLoop) -> np.ndarray:
    k = np.arange(-loop.order, loop.order + 1)
    return _real_coords((k ** 2)[:, None, None] * loop.coeffs)


def torus_raw_gradients(loop: L.FreeLoop) -> np.ndarray:
    """Euclidean gradients of ``p_1..p_N`` (Fourier form), shape (N, P)."""
    k = np.arange(-loop.order, loop.order + 1)
    out = []
    for j in range(loop.N):
        mask = np.zeros_like(loop.coeffs)
        mask[:, j, :] = loop.coeffs[:, j, :]
        out.append(_real_coords(2 * k[:, None, None] * mask))
    return np.array(out)


class Objective:
    """A smooth function on based loops.

    Subclasses provide ``value``; those that know their Euclidean gradient in
    real coefficient coordinates (exact on the constraint set) also provide
    ``raw_gradient``.  Without it, :func:`gradient` falls back to central
    differences through the retraction.
    """

    name = "objective"

    def value(self, loop: L.AlgebraicLoop) -> float:
        raise NotImplementedError

    raw_gradient: Callable | None = None

    def __call__(self, loop):
        return self.value(loop)


class Energy(Objective):
    name = "energy"

    def value(self, loop):
        return energy(loop)

    def raw_gradient(self, loop):
        return energy_raw_gradient(loop)


class MomentComponent(Objective):
    """``gamma -> <mu(gamma), (rho, tau)>``."""

    def __init__(self, xi: CovectorTR):
        self.xi = xi
        self.name = f"pair{list(xi.rho.chart)},{xi.tau}"

    def value(self, loop):
        return pair(moment(loop), self.xi)

    def raw_gradient(self, loop):
        g = self.xi.tau * energy_raw_gradient(loop)
        return g + self.xi.rho.array() @ torus_raw_gradients(loop)


class TiltedEnergy(MomentComponent):
    """Tilted energy; equals ``<mu, (rho, 1)> + |rho|^2 / 2``."""

    def __init__(self, rho: TorusVector):
        super().__init__(CovectorTR(rho, 1.0))
        self.rho = rho
        self.name = f"tilted{list(rho.chart)}"

    def value(self, loop):
        return tilted_energy(loop, self.rho)


class FunctionObjective(Objective):
    """Wrap a plain callable; its gradient is computed by finite differences."""

    def __init__(self, fn, name="function"):
        self.fn = fn
        self.name = name

    def value(self, loop):
        return float(self.fn(loop))


# -- chart and metric -------------------------------------------------------

class H1Metric:
    """H^1 Gram of based chart coordinates of a given (N, order), factorized once."""

    def __init__(self, N: int, order: int):
        self.N, self.order = N, order
        self.gram = L.h1_gram(N=N, order=order, based=True)
        self.cond = float(np.linalg.cond(self.gram))
        if self.cond > 1e12:
            raise GradientError(f"H1 Gram is ill-conditioned (cond {self.cond:.2e})")
        self._cho = scipy.linalg.cho_factor(self.gram)
        self.basis = L.based_tangent_basis(N, order)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def solve(self, df: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._cho, df)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ self.gram @ b)

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def tangent_coeffs(self, coords: np.ndarray) -> np.ndarray:
        return np.einsum("i,ikab->kab", coords, self.basis)


_METRICS: dict = {}


def h1_metric(N: int, order: int) -> H1Metric:
    """Shared metric handle for (N, order); construction is deterministic."""
    key = (N, order)
    if key not in _METRICS:
        _METRICS[key] = H1Metric(N, order)
    return _METRICS[key]


def chart_differential(loop: L.AlgebraicLoop, metric: H1Metric | None = None,
                       rcond: float = 1e-6) -> np.ndarray:
    """Derivative at 0 of ``eta -> retract(gamma + gamma eta)``.

    Returns the real matrix (P x dim) sending based chart coordinates to real
    coefficient perturbations: truncate ``gamma eta`` to the loop's order,
    project onto the tangent space of the constraint set, then linearize the
    re-basing ``A_k -> A_k gamma(0)^-1``.
    """
    metric = metric or h1_metric(loop.N, loop.order)
    n = loop.order
    N = loop.N
    basis = metric.basis                                   # (d, 2n+1, N, N)
    # truncated product gamma * eta for every basis element
    full = np.zeros((basis.shape[0], 4 * n + 1, N, N), dtype=complex)
    for i in range(2 * n + 1):
        full[:, i:i + 2 * n + 1] += np.einsum("ab,dkbc->dkac", loop.coeffs[i], basis)
    d = full[:, n:3 * n + 1]
    proj = L.free_tangent_projector(loop, rcond)
    real = np.concatenate([d.reshape(d.shape[0], -1).real, d.reshape(d.shape[0], -1).imag], axis=1)
    real = real @ proj                                     # projector is symmetric
    half = real.shape[1] // 2
    dc = (real[:, :half] + 1j * real[:, half:]).reshape(d.shape)
    dc = dc - np.einsum("kab,dbc->dkac", loop.coeffs, dc.sum(axis=1))
    flat = dc.reshape(dc.shape[0], -1)
    return np.concatenate([flat.real, flat.imag], axis=1).T


def chart_step(loop: L.AlgebraicLoop, coords: np.ndarray, t: float = 1.0,
               metric: H1Metric | None = None) -> L.AlgebraicLoop:
    """``retract(gamma + t gamma eta)`` for chart coordinates ``coords``."""
    metric = metric or h1_metric(loop.N, loop.order)
    eta = metric.tangent_coeffs(coords)
    raw = L.pad(loop.coeffs, 2 * loop.order) + t * L.multiply(loop.coeffs, eta)
    return L.retract(raw, loop.order, hint=loop.constraint_parts())


@dataclasses.dataclass
class Gradient:
    coords: np.ndarray          # chart coordinates of the gradient
    differential: np.ndarray    # df on the chart basis
    norm: float
    metric: H1Metric
    base: L.AlgebraicLoop

    def tangent(self) -> L.LoopTangent:
        return L.LoopTangent(self.metric.tangent_coeffs(self.coords), self.base, check=False)


def _finite_difference_differential(f: Objective, loop, metric, h=1e-5) -> np.ndarray:
    df = np.zeros(metric.dim)
    for a in range(metric.dim):
        e = np.zeros(metric.dim)
        e[a] = 1.0
        df[a] = (f.value(chart_step(loop, e, h, metric)) -
                 f.value(chart_step(loop, e, -h, metric))) / (2 * h)
    return df


def differential(f: Objective, loop: L.AlgebraicLoop, metric: H1Metric | None = None,
                 chart: np.ndarray | None = None) -> np.ndarray:
    """Differential of ``f`` on the chart basis at ``loop``."""
    metric = metric or h1_metric(loop.N, loop.order)
    if f.raw_gradient is None:
        return _finite_difference_differential(f, loop, metric)
    if chart is None:
        chart = chart_differential(loop, metric)
    return chart.T @ f.raw_gradient(loop)


def gradient(f: Objective, loop: L.AlgebraicLoop, metric: H1Metric | None = None,
             chart: np.ndarray | None = None) -> Gradient:
    """H^1 gradient of ``f`` in chart coordinates at ``loop``."""
    metric = metric or h1_metric(loop.N, loop.order)
    df = differential(f, loop, metric, chart)
    g = metric.solve(df)
    return Gradient(g, df, float(np.sqrt(max(df @ g, 0.0))), metric, loop)


def moment_gradients(loop: L.AlgebraicLoop, metric: H1Metric | None = None,
                     chart: np.ndarray | None = None):
    """Chart differentials of E and of p_1..p_N at ``loop``.

    Returns ``(dE, dP)`` with dE of shape (dim,) and dP of shape (N, dim).
    Any moment component's differential is a linear combination of these.
    """
    metric = metric or h1_metric(loop.N, loop.order)
    if chart is None:
        chart = chart_differential(loop, metric)
    dE = chart.T @ energy_raw_gradient(loop)
    dP = torus_raw_gradients(loop) @ chart
    return dE, dP


def component_differential(xi: CovectorTR, dE: np.ndarray, dP: np.ndarray) -> np.ndarray:
    return xi.tau * dE + xi.rho.array() @ dP
