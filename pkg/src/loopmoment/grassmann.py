"""Finite Grassmannian model of based loops.

A based loop ``gamma`` of order at most ``n`` sends ``H_+`` to a subspace
``W = gamma H_+`` with ``z^n H_+ ⊂ W ⊂ z^-n H_+``.  The quotient
``W / z^n H_+`` is an ``nN``-plane in the ``2nN``-dimensional space with
basis ``z^k b_j`` (``-n <= k <= n-1``), ordered k-major:
index ``(k + n) * N + j``.

The torus acts on basis vector ``z^k b_j`` by the character ``eps_j``
and the rotation by ``z^k``, so the moment map of the projective model is
the weighted average of subset weights over the Plücker coordinates.  For an
orthonormal basis ``B`` this average equals the weighted trace of the
projector ``B B^*``, which is the evaluation used for large ``nN``.
"""
from __future__ import annotations

import dataclasses
import functools
import itertools
import math

import numpy as np

from . import loops as L
from .liegroup import LatticeVector, TorusVector
from .moment import CovectorTR, MomentValue, moment

RANK_TOL = 1e-10
EQUAL_TOL = 1e-8
MAX_MINOR_SIZE = 8


class GrassmannError(ValueError):
    pass


def index(k: int, j: int, n: int, N: int) -> int:
    if not (-n <= k <= n - 1 and 0 <= j < N):
        raise GrassmannError(f"index (k={k}, j={j}) outside the order-{n} model")
    return (k + n) * N + j


def legend(n: int, N: int) -> list[tuple[int, int]]:
    return [(k, j) for k in range(-n, n) for j in range(N)]


def weights(n: int, N: int):
    """Per-index weights: integer T-character (length-N array) and rotation weight k."""
    out = []
    for k, j in legend(n, N):
        e = np.zeros(N, dtype=int)
        e[j] = 1
        out.append((e, k))
    return out


def subset_weight(subset, n: int, N: int):
    w = weights(n, N)
    t = sum((w[i][0] for i in subset), np.zeros(N, dtype=int))
    return t, sum(w[i][1] for i in subset)


def _orthonormal(b: np.ndarray, rank: int) -> np.ndarray:
    u, s, _ = np.linalg.svd(b, full_matrices=False)
    if s.size < rank or s[rank - 1] <= RANK_TOL * max(s[0], 1.0):
        smin = s[rank - 1] if s.size >= rank else 0.0
        raise GrassmannError(f"basis is rank deficient (sigma_{rank} = {smin:.2e})")
    return u[:, :rank]


class GrassPoint:
    """An ``nN``-plane in ``C^{2nN}``, kept as an orthonormal basis.

    Two points compare equal when their orthogonal projectors agree to
    ``EQUAL_TOL``; the projector is the canonical form.
    """

    def __init__(self, basis, n: int, N: int):
        b = np.array(basis, dtype=complex)
        if b.shape != (2 * n * N, n * N):
            raise GrassmannError(f"expected a {2 * n * N} x {n * N} basis, got {b.shape}")
        norms = np.linalg.norm(b, axis=0)
        if np.any(norms == 0):
            raise GrassmannError("basis has a zero column")
        self.B = _orthonormal(b / norms, n * N)
        self.B.setflags(write=False)
        self.n, self.N = n, N

    @property
    def dim(self) -> int:
        return 2 * self.n * self.N

    @property
    def rank(self) -> int:
        return self.n * self.N

    @functools.cached_property
    def projector(self) -> np.ndarray:
        p = self.B @ self.B.conj().T
        p.setflags(write=False)
        return p

    def distance(self, other: "GrassPoint") -> float:
        return float(np.linalg.norm(self.projector - other.projector))

    def __eq__(self, other):
        if not isinstance(other, GrassPoint) or (self.n, self.N) != (other.n, other.N):
            return NotImplemented
        return self.distance(other) < EQUAL_TOL

    __hash__ = None

    def transform_rows(self, factors) -> "GrassPoint":
        """Apply ``diag(factors)`` to the ambient space."""
        return GrassPoint(np.asarray(factors)[:, None] * self.B, self.n, self.N)

    def to_json(self) -> dict:
        return {
            "n": self.n, "N": self.N,
            "legend": [list(kj) for kj in legend(self.n, self.N)],
            "re": self.B.real.tolist(), "im": self.B.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict):
        b = np.array(data["re"]) + 1j * np.array(data["im"])
        return cls(b, int(data["n"]), int(data["N"]))

    def __repr__(self):
        return f"GrassPoint(n={self.n}, N={self.N})"


def embed(loop: L.AlgebraicLoop, n: int | None = None) -> GrassPoint:
    """The plane ``gamma H_+ / z^n H_+``.

    Spanned by ``gamma z^k b_j`` for ``0 <= k <= 2n-1``: since ``gamma`` has
    frequencies down to ``-n``, the vectors with ``k < n`` alone need not
    span the quotient, while those with ``k >= 2n`` lie in ``z^n H_+``.
    """
    N, order = loop.N, loop.order
    n = order if n is None else n
    if n < max(order, 1):
        raise GrassmannError(f"model order {n} is below the loop order {order} (or zero)")
    c = L.pad(loop.coeffs, n)                       # frequencies -n..n
    cols = np.zeros((2 * n * N, 2 * n * N), dtype=complex)
    for k in range(2 * n):
        for l in range(-n, n + 1):
            f = l + k
            if f >= n:
                break
            r = (f + n) * N
            cols[r:r + N, k * N:(k + 1) * N] = c[l + n]
    return GrassPoint(_orthonormal(cols, n * N), n, N)


# -- Plücker coordinates ------------------------------------------------------

@dataclasses.dataclass
class PlueckerVector:
    """Unit-norm nonzero Plücker coordinates, keyed by sorted index subsets."""
    coords: dict
    n: int
    N: int

    @property
    def k(self) -> int:
        return self.n * self.N

    def value(self, seq) -> complex:
        """Coordinate of an ordered index tuple (antisymmetric in its entries)."""
        seq = tuple(seq)
        if len(set(seq)) < len(seq):
            return 0.0
        order = sorted(range(len(seq)), key=lambda i: seq[i])
        sign = _perm_sign(order)
        return sign * self.coords.get(tuple(sorted(seq)), 0.0)

    def support(self):
        return sorted(self.coords)

    def exchange_residual(self, rng: np.random.Generator, samples: int = 50) -> float:
        """Largest Grassmann-Plücker relation residual over random (I, J)."""
        d = 2 * self.n * self.N
        k = self.k
        worst = 0.0
        for _ in range(samples):
            I = tuple(rng.choice(d, k - 1, replace=False))
            J = tuple(sorted(rng.choice(d, k + 1, replace=False)))
            s = 0.0
            for l, j in enumerate(J):
                s += (-1) ** l * self.value(I + (j,)) * self.value(J[:l] + J[l + 1:])
            worst = max(worst, abs(s))
        return float(worst)


def _perm_sign(order) -> int:
    sign, seen = 1, [False] * len(order)
    for i in range(len(order)):
        if seen[i]:
            continue
        j, cycle = i, 0
        while not seen[j]:
            seen[j] = True
            j = order[j]
            cycle += 1
        if cycle % 2 == 0:
            sign = -sign
    return sign


def pluecker(point: GrassPoint, drop: float = 1e-14) -> PlueckerVector:
    """All maximal minors of the basis, normalized to unit 2-norm."""
    k = point.rank
    if k > MAX_MINOR_SIZE:
        raise GrassmannError(f"minor enumeration is limited to nN <= {MAX_MINOR_SIZE}")
    subsets = list(itertools.combinations(range(point.dim), k))
    b = point.B
    vals = np.empty(len(subsets), dtype=complex)
    chunk = 4096
    for s in range(0, len(subsets), chunk):
        idx = np.array(subsets[s:s + chunk])
        vals[s:s + chunk] = np.linalg.det(b[idx])
    norm = np.linalg.norm(vals)
    if norm == 0:
        raise GrassmannError("all Plücker coordinates vanish")
    vals /= norm
    keep = np.abs(vals) > drop
    return PlueckerVector({subsets[i]: complex(vals[i]) for i in np.flatnonzero(keep)},
                          point.n, point.N)


# -- moment map ---------------------------------------------------------------

def raw_moment_trace(point: GrassPoint):
    """Uncalibrated weight average ``sum_i w_i P_ii`` (T part, rotation part)."""
    d = np.real(np.diag(point.projector))
    w = weights(point.n, point.N)
    t = sum(d[i] * w[i][0] for i in range(len(w)))
    rot = sum(d[i] * w[i][1] for i in range(len(w)))
    return np.asarray(t, float), float(rot)


def raw_moment_pluecker(vec: PlueckerVector):
    n, N = vec.n, vec.N
    w = weights(n, N)
    tot = 0.0
    t = np.zeros(N)
    rot = 0.0
    for s, v in vec.coords.items():
        a = abs(v) ** 2
        tot += a
        t += a * sum(w[i][0] for i in s)
        rot += a * sum(w[i][1] for i in s)
    return t / tot, rot / tot


@dataclasses.dataclass(frozen=True)
class Calibration:
    """Affine map from raw weight averages to (p, E)."""
    n: int
    N: int
    offset_t: tuple
    offset_rot: float
    sign_t: float
    sign_rot: float

    def apply(self, raw_t, raw_rot) -> MomentValue:
        x = self.sign_t * (np.asarray(raw_t) - np.asarray(self.offset_t))
        return MomentValue(TorusVector(x - x.mean()), self.sign_rot * (raw_rot - self.offset_rot))


def _anchor_loop(N: int) -> L.AlgebraicLoop:
    return L.lattice_loop(LatticeVector([1, -1] + [0] * (N - 2)))


@functools.lru_cache(maxsize=None)
def calibration(n: int, N: int) -> Calibration:
    """Fix offsets from the constant loop and signs from the lattice loop of (1, -1, 0, ...)."""
    t0, r0 = raw_moment_trace(embed(L.constant_loop(N), n))
    t1, r1 = raw_moment_trace(embed(_anchor_loop(N), n))
    target = moment(_anchor_loop(N))
    dt = t1 - t0
    dt = dt - dt.mean()
    st = 1.0 if float(dt @ target.p.array()) >= 0 else -1.0
    sr = 1.0 if (r1 - r0) * target.E >= 0 else -1.0
    return Calibration(n, N, tuple(t0), r0, st, sr)


def grass_moment(point: GrassPoint, method: str = "trace") -> MomentValue:
    """Calibrated moment map of the projective model, by trace formula or minors."""
    if method == "trace":
        raw = raw_moment_trace(point)
    elif method == "pluecker":
        raw = raw_moment_pluecker(pluecker(point))
    else:
        raise ValueError(f"unknown method {method!r}")
    return calibration(point.n, point.N).apply(*raw)


# -- torus actions --------------------------------------------------------------

def torus_action(point: GrassPoint, t: np.ndarray) -> GrassPoint:
    """Left multiplication by a diagonal torus element ``t``."""
    d = np.diag(np.asarray(t))
    return point.transform_rows(np.array([d[j] for _, j in legend(point.n, point.N)]))


def rotation_action(point: GrassPoint, s: float) -> GrassPoint:
    """``f(theta) -> f(theta + s)``: index (k, j) picks up ``exp(i k s)``."""
    return point.transform_rows(np.array([np.exp(1j * k * s) for k, _ in legend(point.n, point.N)]))


def complex_weights(point_or_n, N=None, xi: CovectorTR | None = None) -> np.ndarray:
    if isinstance(point_or_n, GrassPoint):
        n, N = point_or_n.n, point_or_n.N
    else:
        n = point_or_n
    rho = xi.rho.array()
    return np.array([rho[j] + k * xi.tau for k, j in legend(n, N)])


def torus_orbit_flow(point: GrassPoint, xi: CovectorTR, t: float, max_log_ratio: float = 5.0) -> GrassPoint:
    """Flow of the real one-parameter subgroup ``exp(t xi)`` of the complex torus.

    Row ``(k, j)`` is scaled by ``exp(t (rho_j + k tau))``; the flow is applied
    in increments whose spread of log-scalings stays below ``max_log_ratio``,
    re-orthonormalizing after each, so large ``|t|`` does not overflow.
    """
    w = complex_weights(point, xi=xi)
    spread = float(w.max() - w.min())
    if t == 0 or spread == 0:
        return point
    pieces = max(1, math.ceil(abs(t) * spread / max_log_ratio))
    dt = t / pieces
    cur = point
    for _ in range(pieces):
        f = np.exp(dt * (w - w.max() if dt > 0 else w - w.min()))
        cur = cur.transform_rows(f)
    return cur


def is_fixed_point(point: GrassPoint, tol: float = 1e-10) -> bool:
    """Whether the plane is spanned by basis vectors (a coordinate subspace)."""
    d = np.real(np.diag(point.projector))
    return bool(np.all(np.minimum(np.abs(d), np.abs(1 - d)) < tol))


def diagram_residual(loop: L.AlgebraicLoop, n: int | None = None, method: str = "trace") -> float:
    """``|grass_moment(embed(gamma)) - mu(gamma)|``."""
    return grass_moment(embed(loop, n), method).distance(moment(loop))
