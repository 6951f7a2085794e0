"""Lie theory for SU(N): algebra, maximal torus, roots and the integer lattice.

The invariant inner product on su(N) is fixed as ``<a, b> = -tr(ab)``.  With
this choice the torus vector ``i*diag(m)`` has squared norm ``sum(m_j**2)``.
"""
from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np


ALGEBRA_TOL = 1e-12
GROUP_TOL = 1e-10


class LieGroupError(ValueError):
    pass


# -- matrices -----------------------------------------------------------

def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Invariant inner product ``-tr(ab)`` on su(N)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LieGroupError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(-np.einsum("ij,ji->", a, b).real)


def norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def is_group_element(g: np.ndarray, tol: float = GROUP_TOL) -> bool:
    g = np.asarray(g)
    n = g.shape[0]
    unitary = np.linalg.norm(g.conj().T @ g - np.eye(n)) <= tol
    return bool(unitary and abs(np.linalg.det(g) - 1.0) <= tol)


def is_lie_vector(a: np.ndarray, tol: float = ALGEBRA_TOL) -> bool:
    a = np.asarray(a)
    return bool(np.linalg.norm(a + a.conj().T) <= tol and abs(np.trace(a)) <= tol)


def is_torus_element(t: np.ndarray, tol: float = GROUP_TOL) -> bool:
    t = np.asarray(t)
    off = t - np.diag(np.diag(t))
    return bool(np.linalg.norm(off) <= tol and is_group_element(t, tol))


def project_algebra(a: np.ndarray) -> np.ndarray:
    """Orthogonal projection of an arbitrary square matrix onto su(N)."""
    a = np.asarray(a, dtype=complex)
    s = 0.5 * (a - a.conj().swapaxes(-1, -2))
    n = a.shape[-1]
    tr = np.trace(s, axis1=-2, axis2=-1)[..., None, None]
    return s - tr * np.eye(n) / n


def project_t(a: np.ndarray) -> "TorusVector":
    """Orthogonal projection su(N) -> t, i.e. the imaginary diagonal part."""
    a = np.asarray(a)
    m = np.diag(a).imag
    return TorusVector(m - m.mean())


def random_su(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SU(n)."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q / np.linalg.det(q) ** (1.0 / n)


def random_algebra(n: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return project_algebra(z)


def random_torus_element(n: int, rng: np.random.Generator) -> np.ndarray:
    phases = rng.uniform(-np.pi, np.pi, n)
    phases -= phases.mean()
    return np.diag(np.exp(1j * phases))


# -- torus and lattice --------------------------------------------------

class TorusVector:
    """Element ``i*diag(m_1..m_N)`` of t with ``sum(m) == 0``.

    Construct from all N coordinates (which must sum to zero) or use
    :meth:`from_chart` with the first N-1.  The last coordinate is always
    stored as minus the sum of the others.
    """

    __slots__ = ("_coords",)

    def __init__(self, coords: Iterable[float]):
        c = [float(x) for x in coords]
        if len(c) < 1:
            raise LieGroupError("torus vector needs at least one coordinate")
        if abs(sum(c)) > 1e-9 * max(1.0, max(abs(x) for x in c)):
            raise LieGroupError(f"coordinates must sum to zero, got {c}")
        c[-1] = -sum(c[:-1])
        self._coords = tuple(c)

    @classmethod
    def from_chart(cls, chart: Sequence[float]):
        chart = list(chart)
        return cls(chart + [-sum(chart)])

    @property
    def N(self) -> int:
        return len(self._coords)

    @property
    def coords(self) -> tuple:
        return self._coords

    @property
    def chart(self) -> tuple:
        return self._coords[:-1]

    def array(self) -> np.ndarray:
        return np.array(self._coords, dtype=float)

    def matrix(self) -> np.ndarray:
        return 1j * np.diag(self.array())

    def norm_sq(self) -> float:
        return float(sum(x * x for x in self._coords))

    def dot(self, other: "TorusVector") -> float:
        _check_same_n(self, other)
        return float(sum(x * y for x, y in zip(self._coords, other._coords)))

    def exp(self, theta: float = 1.0) -> np.ndarray:
        return np.diag(np.exp(1j * theta * self.array()))

    def scaled(self, c: float) -> "TorusVector":
        return TorusVector([c * x for x in self._coords])

    def __add__(self, other):
        _check_same_n(self, other)
        return TorusVector([x + y for x, y in zip(self._coords, other._coords)])

    def __sub__(self, other):
        _check_same_n(self, other)
        return TorusVector([x - y for x, y in zip(self._coords, other._coords)])

    def __neg__(self):
        return self.scaled(-1.0)

    def __eq__(self, other):
        return isinstance(other, TorusVector) and self._coords == other._coords

    def __hash__(self):
        return hash(self._coords)

    def __repr__(self):
        return f"{type(self).__name__}({list(self._coords)})"

    def to_json(self) -> dict:
        return {"N": self.N, "coords": list(self.chart)}

    @classmethod
    def from_json(cls, data: dict):
        n = int(data["N"])
        chart = list(data["coords"])
        if len(chart) != n - 1:
            raise LieGroupError(f"expected {n - 1} chart coordinates, got {len(chart)}")
        return cls.from_chart(chart)


class LatticeVector(TorusVector):
    """Integer torus vector; ``exp(2*pi*X) = I``."""

    def __init__(self, coords: Iterable[int]):
        c = list(coords)
        ints = []
        for x in c:
            if int(x) != x:
                raise LieGroupError(f"lattice coordinates must be integers, got {c}")
            ints.append(int(x))
        if sum(ints) != 0:
            raise LieGroupError(f"coordinates must sum to zero, got {ints}")
        self._coords = tuple(ints)

    @classmethod
    def from_chart(cls, chart: Sequence[int]):
        chart = [int(x) for x in chart]
        return cls(chart + [-sum(chart)])

    def norm_sq(self) -> int:
        return sum(x * x for x in self._coords)

    def dominant(self) -> "LatticeVector":
        """Weyl-orbit representative with coordinates in decreasing order."""
        return LatticeVector(sorted(self._coords, reverse=True))


def _check_same_n(a: TorusVector, b: TorusVector):
    if a.N != b.N:
        raise LieGroupError(f"dimension mismatch: SU({a.N}) vs SU({b.N})")


class Root:
    """The root ``alpha_ij(X) = m_i - m_j``."""

    __slots__ = ("i", "j")

    def __init__(self, i: int, j: int):
        if i == j:
            raise LieGroupError("a root needs i != j")
        self.i, self.j = i, j

    def __call__(self, x: TorusVector):
        c = x.coords
        return c[self.i] - c[self.j]

    def __neg__(self):
        return Root(self.j, self.i)

    def __eq__(self, other):
        return isinstance(other, Root) and (self.i, self.j) == (other.i, other.j)

    def __hash__(self):
        return hash((self.i, self.j))

    def __repr__(self):
        return f"Root({self.i}, {self.j})"


def roots(n: int) -> list[Root]:
    return [Root(i, j) for i in range(n) for j in range(n) if i != j]


def is_regular(x: TorusVector, tol: float = ALGEBRA_TOL) -> bool:
    c = x.coords
    if isinstance(x, LatticeVector):
        return len(set(c)) == len(c)
    return all(abs(c[i] - c[j]) > tol for i, j in itertools.combinations(range(len(c)), 2))


def is_admissible(x: LatticeVector, q: int) -> bool:
    """Whether ``x/q`` avoids every affine root hyperplane ``alpha = k``."""
    if q == 0:
        raise LieGroupError("q must be nonzero")
    if not isinstance(x, LatticeVector):
        x = LatticeVector(x.coords)
    if not is_regular(x):
        return False
    return all(Fraction(r(x), q).denominator != 1 for r in roots(x.N))


def enumerate_lattice(radius: float, n: int) -> list[LatticeVector]:
    """All lattice vectors of SU(n) with norm <= radius, sorted by norm.

    Ties are broken by descending coordinates so the order is deterministic.
    """
    if radius < 0:
        raise LieGroupError("radius must be nonnegative")
    r2 = radius * radius
    bound = int(np.floor(radius + 1e-12))
    out = []
    for head in itertools.product(range(-bound, bound + 1), repeat=n - 1):
        c = list(head) + [-sum(head)]
        if sum(x * x for x in c) <= r2 + 1e-9:
            out.append(LatticeVector(c))
    out.sort(key=lambda v: (v.norm_sq(), tuple(-x for x in v.coords)))
    return out
