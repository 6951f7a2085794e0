"""Algebraic loops in SU(N) stored as finite Fourier series.

A loop of order ``n`` is ``gamma(theta) = sum_{k=-n..n} A_k exp(i k theta)``
with coefficients held in an array of shape ``(2n+1, N, N)``; index ``k + n``
holds ``A_k``.  Integrals over the circle are evaluated with the uniform
trapezoid rule on ``8n+1`` points, which is exact for every integrand built
here (trigonometric polynomials of degree at most ``4n``).
"""
from __future__ import annotations

import functools
import json

import numpy as np

from .liegroup import LatticeVector, is_torus_element, project_algebra


GROUP_SAMPLE_TOL = 1e-8
BASED_TOL = 1e-9
SINGULAR_TOL = 1e-10


class LoopError(ValueError):
    pass


class RetractionError(LoopError):
    pass


# -- grids --------------------------------------------------------------

def grid_size(order: int) -> int:
    return 8 * order + 1


@functools.lru_cache(maxsize=None)
def grid(order: int) -> np.ndarray:
    m = grid_size(order)
    return 2 * np.pi * np.arange(m) / m


@functools.lru_cache(maxsize=None)
def _phases(order: int, m: int) -> np.ndarray:
    """``exp(i k theta_s)`` for the m-point grid, shape (m, 2*order+1)."""
    theta = 2 * np.pi * np.arange(m) / m
    k = np.arange(-order, order + 1)
    out = np.exp(1j * np.outer(theta, k))
    out.setflags(write=False)
    return out


def synthesize(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Sample a matrix Fourier series on the m-point uniform grid."""
    order = (coeffs.shape[0] - 1) // 2
    return np.einsum("sk,kab->sab", _phases(order, m), coeffs)


def analyze(samples: np.ndarray, order: int) -> np.ndarray:
    """Fourier coefficients ``|k| <= order`` of uniformly sampled values."""
    m = samples.shape[0]
    if m < 2 * order + 1:
        raise LoopError(f"{m} samples cannot resolve order {order}")
    return np.einsum("sk,sab->kab", _phases(order, m).conj(), samples) / m


def pad(coeffs: np.ndarray, order: int) -> np.ndarray:
    """Zero-pad (or truncate) a coefficient array to the given order."""
    n = (coeffs.shape[0] - 1) // 2
    out = np.zeros((2 * order + 1,) + coeffs.shape[1:], dtype=complex)
    lo = min(n, order)
    out[order - lo:order + lo + 1] = coeffs[n - lo:n + lo + 1]
    return out


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients of the pointwise matrix product of two Fourier series."""
    na = (a.shape[0] - 1) // 2
    nb = (b.shape[0] - 1) // 2
    out = np.zeros((2 * (na + nb) + 1,) + a.shape[1:], dtype=complex)
    for i in range(a.shape[0]):
        out[i:i + b.shape[0]] += np.einsum("ab,kbc->kac", a[i], b)
    return out


# -- loop types ---------------------------------------------------------

class FreeLoop:
    """A loop S^1 -> SU(N) given by Fourier coefficients, not necessarily based."""

    def __init__(self, coeffs, *, check: bool = True):
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2] or c.shape[0] % 2 != 1:
            raise LoopError(f"coefficients must have shape (2n+1, N, N), got {c.shape}")
        c.setflags(write=False)
        self._coeffs = c
        self._parts = {}
        if check:
            self.validate()

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def N(self) -> int:
        return self._coeffs.shape[1]

    @property
    def order(self) -> int:
        return (self._coeffs.shape[0] - 1) // 2

    def coeff(self, k: int) -> np.ndarray:
        n = self.order
        if abs(k) > n:
            return np.zeros((self.N, self.N), dtype=complex)
        return self._coeffs[k + n]

    def __call__(self, theta):
        return self.evaluate(theta)

    def evaluate(self, theta):
        """Value at ``theta`` (scalar or 1-d array)."""
        t = np.asarray(theta, dtype=float)
        k = np.arange(-self.order, self.order + 1)
        ph = np.exp(1j * np.multiply.outer(t, k))
        return np.einsum("...k,kab->...ab", ph, self._coeffs)

    def samples(self, m: int | None = None) -> np.ndarray:
        return synthesize(self._coeffs, m or grid_size(self.order))

    def derivative_coeffs(self) -> np.ndarray:
        k = np.arange(-self.order, self.order + 1)
        return 1j * k[:, None, None] * self._coeffs

    def constraint_parts(self, rcond: float = 1e-6):
        """Cached ``(J, v, lam)``: constraint Jacobian and its kept normal eigenpairs."""
        if rcond not in self._parts:
            jac = constraint_jacobian(self._coeffs)
            self._parts[rcond] = (jac,) + _normal_parts(jac, rcond)
        return self._parts[rcond]

    def derivative_samples(self, m: int | None = None) -> np.ndarray:
        return synthesize(self.derivative_coeffs(), m or grid_size(self.order))

    def group_defect(self, m: int | None = None) -> float:
        """Largest unitarity / determinant violation over the sample grid."""
        g = self.samples(m)
        eye = np.eye(self.N)
        uni = np.linalg.norm(np.conj(np.swapaxes(g, 1, 2)) @ g - eye, axis=(1, 2)).max()
        det = np.abs(np.linalg.det(g) - 1.0).max()
        return float(max(uni, det))

    def validate(self, tol: float = GROUP_SAMPLE_TOL):
        d = self.group_defect()
        if d > tol:
            raise LoopError(f"loop is not SU({self.N})-valued: defect {d:.3e}")

    def trimmed(self, tol: float = 0.0):
        """Copy with vanishing outer coefficients removed."""
        c = self._coeffs
        n = self.order
        while n > 0 and np.abs(c[0]).max() <= tol and np.abs(c[-1]).max() <= tol:
            c = c[1:-1]
            n -= 1
        return type(self)(c, check=False)

    def padded(self, order: int):
        if order < self.order:
            raise LoopError("padding cannot lower the order")
        return type(self)(pad(self._coeffs, order), check=False)

    def __repr__(self):
        return f"{type(self).__name__}(N={self.N}, order={self.order})"

    # -- serialization --

    def to_json(self) -> dict:
        n = self.order
        return {
            "group": "SU",
            "N": self.N,
            "order": n,
            "coeffs": [
                {"k": k, "re": self.coeff(k).real.tolist(), "im": self.coeff(k).imag.tolist()}
                for k in range(-n, n + 1)
            ],
        }

    @classmethod
    def from_json(cls, data: dict, check: bool = True):
        if data.get("group", "SU") != "SU":
            raise LoopError(f"unsupported group {data.get('group')!r}")
        N = int(data["N"])
        n = int(data["order"])
        c = np.zeros((2 * n + 1, N, N), dtype=complex)
        for entry in data["coeffs"]:
            k = int(entry["k"])
            if abs(k) > n:
                raise LoopError(f"frequency {k} exceeds order {n}")
            c[k + n] = np.array(entry["re"]) + 1j * np.array(entry["im"])
        return cls(c, check=check)


class AlgebraicLoop(FreeLoop):
    """A based algebraic loop: ``gamma(0) = I``."""

    def validate(self, tol: float = GROUP_SAMPLE_TOL):
        base = np.linalg.norm(self._coeffs.sum(axis=0) - np.eye(self.N))
        if base > BASED_TOL:
            raise LoopError(f"loop is not based: |gamma(0) - I| = {base:.3e}")
        super().validate(tol)


class LoopTangent:
    """Left-trivialized tangent ``delta gamma = gamma * xi`` to a based loop.

    ``xi`` is an su(N)-valued Fourier series with ``xi(0) = 0``.  ``base`` is
    the loop the tangent is attached to (None means the constant loop).
    """

    def __init__(self, coeffs, base: AlgebraicLoop | None = None, *, check: bool = True):
        c = np.array(coeffs, dtype=complex)
        c.setflags(write=False)
        self.coeffs = c
        self.base = base
        if check:
            self.validate()

    @property
    def order(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    def samples(self, m: int | None = None) -> np.ndarray:
        return synthesize(self.coeffs, m or grid_size(self.order))

    def derivative_coeffs(self) -> np.ndarray:
        k = np.arange(-self.order, self.order + 1)
        return 1j * k[:, None, None] * self.coeffs

    def validate(self, tol: float = 1e-9):
        if np.linalg.norm(self.coeffs.sum(axis=0)) > tol:
            raise LoopError("tangent is not based: sum of coefficients is nonzero")
        x = self.samples()
        if np.abs(x + np.conj(np.swapaxes(x, 1, 2))).max() > tol:
            raise LoopError("tangent is not anti-Hermitian")
        if np.abs(np.trace(x, axis1=1, axis2=2)).max() > tol:
            raise LoopError("tangent is not traceless")

    def __add__(self, other):
        n = max(self.order, other.order)
        return LoopTangent(pad(self.coeffs, n) + pad(other.coeffs, n), self.base, check=False)

    def __mul__(self, c: float):
        return LoopTangent(c * self.coeffs, self.base, check=False)

    __rmul__ = __mul__


# -- constructors -------------------------------------------------------

def constant_loop(N: int, order: int = 0) -> AlgebraicLoop:
    c = np.zeros((2 * order + 1, N, N), dtype=complex)
    c[order] = np.eye(N)
    return AlgebraicLoop(c, check=False)


def lattice_loop(x: LatticeVector) -> AlgebraicLoop:
    """The homomorphism ``theta -> exp(theta X)`` as an exact Fourier series."""
    m = [int(v) for v in x.coords]
    n = max(abs(v) for v in m)
    c = np.zeros((2 * n + 1, len(m), len(m)), dtype=complex)
    for j, v in enumerate(m):
        c[v + n, j, j] = 1.0
    return AlgebraicLoop(c, check=False)


def near_identity_sequence(n: int) -> FreeLoop:
    """The near-identity SU(2) loops with off-diagonal modes ``+-n``.

    ``[[s, z^n / n^2], [-z^-n / n^2, s]]`` with ``s = sqrt(1 - 1/n^4)``.
    These are not based: ``gamma(0) != I``.
    """
    s = np.sqrt(1.0 - 1.0 / n ** 4)
    c = np.zeros((2 * n + 1, 2, 2), dtype=complex)
    c[n] = s * np.eye(2)
    c[2 * n, 0, 1] = 1.0 / n ** 2
    c[0, 1, 0] = -1.0 / n ** 2
    return FreeLoop(c)


# -- group actions ------------------------------------------------------

def evaluate(loop: FreeLoop, theta):
    return loop.evaluate(theta)


def rotate(loop: AlgebraicLoop, s: float) -> AlgebraicLoop:
    """Rotation action ``theta -> gamma(s + theta) gamma(s)^-1``."""
    n = loop.order
    k = np.arange(-n, n + 1)
    shifted = loop.coeffs * np.exp(1j * k * s)[:, None, None]
    ginv = np.linalg.inv(loop.evaluate(s))
    return AlgebraicLoop(shifted @ ginv, check=False)


def conjugate(loop: AlgebraicLoop, t: np.ndarray) -> AlgebraicLoop:
    """Torus action ``theta -> t gamma(theta) t^-1``."""
    t = np.asarray(t, dtype=complex)
    if not is_torus_element(t):
        raise LoopError("conjugating element is not in the maximal torus")
    return AlgebraicLoop(t @ loop.coeffs @ np.linalg.inv(t), check=False)


def log_derivative(loop: FreeLoop, m: int | None = None) -> np.ndarray:
    """Samples of ``gamma^-1 gamma'`` on the quadrature grid, shape (m, N, N)."""
    g = loop.samples(m)
    dg = loop.derivative_samples(m)
    return np.linalg.solve(g, dg)


# -- H^1 geometry -------------------------------------------------------

def h1_norm_sq(coeffs: np.ndarray) -> float:
    """``sum_k (1 + k^2) |A_k|_F^2`` for a matrix Fourier series."""
    c = np.asarray(coeffs)
    n = (c.shape[0] - 1) // 2
    k = np.arange(-n, n + 1)
    return float(np.sum((1 + k ** 2) * np.sum(np.abs(c) ** 2, axis=(1, 2))))


def h1_norm_sq_quadrature(coeffs: np.ndarray) -> float:
    """Same quantity as :func:`h1_norm_sq` from the defining integral."""
    c = np.asarray(coeffs)
    n = (c.shape[0] - 1) // 2
    m = grid_size(n)
    k = np.arange(-n, n + 1)
    f = synthesize(c, m)
    df = synthesize(1j * k[:, None, None] * c, m)
    return float(np.mean(np.sum(np.abs(f) ** 2 + np.abs(df) ** 2, axis=(1, 2))))


def _su_basis(N: int) -> np.ndarray:
    """Orthonormal basis of su(N) for the inner product -tr(ab)."""
    out = []
    for a in range(N):
        for b in range(a + 1, N):
            e = np.zeros((N, N), dtype=complex)
            e[a, b], e[b, a] = 1, -1
            out.append(e / np.sqrt(2))
            e = np.zeros((N, N), dtype=complex)
            e[a, b], e[b, a] = 1j, 1j
            out.append(e / np.sqrt(2))
    for d in range(1, N):
        h = np.zeros(N)
        h[:d] = 1
        h[d] = -d
        out.append(1j * np.diag(h) / np.linalg.norm(h))
    return np.array(out)


def _traceless_basis(N: int) -> np.ndarray:
    """Real basis of traceless complex N x N matrices (2(N^2-1) elements)."""
    out = []
    for s in _su_basis(N):
        out.append(s)
        out.append(1j * s)
    return np.array(out)


@functools.lru_cache(maxsize=None)
def full_tangent_basis(N: int, order: int) -> np.ndarray:
    """Real coordinate basis of su(N)-valued Fourier series of the given order.

    Mode 0 contributes an orthonormal basis of su(N); mode k >= 1 contributes
    ``C e^{ik theta} - C^* e^{-ik theta}`` for C in a real basis of traceless
    matrices.  Returned as coefficient arrays, shape (dim, 2*order+1, N, N).
    """
    su = _su_basis(N)
    tl = _traceless_basis(N)
    out = []
    for a in su:
        c = np.zeros((2 * order + 1, N, N), dtype=complex)
        c[order] = a
        out.append(c)
    for k in range(1, order + 1):
        for a in tl:
            c = np.zeros((2 * order + 1, N, N), dtype=complex)
            c[order + k] = a / np.sqrt(2)
            c[order - k] = -a.conj().T / np.sqrt(2)
            out.append(c)
    out = np.array(out)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def based_tangent_map(N: int, order: int) -> np.ndarray:
    """Matrix whose columns span the based subspace ``xi(0) = 0``.

    Expressed in the coordinates of :func:`full_tangent_basis`: the modes
    k >= 1 are free and the constant mode absorbs ``-sum_{k != 0} xi_k``.
    """
    basis = full_tangent_basis(N, order)
    su = _su_basis(N)
    d0 = len(su)
    dim = basis.shape[0]
    cols = []
    for i in range(d0, dim):
        v = np.zeros(dim)
        v[i] = 1.0
        x0 = basis[i].sum(axis=0)
        # constant-mode coordinates from the orthonormal su(N) basis
        for j, s in enumerate(su):
            v[j] = np.einsum("ab,ab->", s.conj(), -x0).real
        cols.append(v)
    out = np.array(cols).T
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def based_tangent_basis(N: int, order: int) -> np.ndarray:
    """Coefficient arrays of the based tangent basis, shape (dim, 2n+1, N, N)."""
    full = full_tangent_basis(N, order)
    out = np.einsum("ij,jkab->ikab", based_tangent_map(N, order).T, full)
    out.setflags(write=False)
    return out


def h1_gram(loop: FreeLoop | None = None, *, N: int | None = None, order: int | None = None,
            based: bool = False) -> np.ndarray:
    """Gram matrix of the left-invariant H^1 metric on tangent coordinates.

    ``<gamma xi, gamma eta>_1 = <xi, eta>_{H^1}`` does not depend on the base
    loop, so only its dimensions are used.  With ``based=True`` the Gram is
    restricted to the based subspace via :func:`based_tangent_map`.
    """
    if loop is not None:
        N, order = loop.N, loop.order
    g = _full_gram(N, order)
    if based:
        b = based_tangent_map(N, order)
        return b.T @ g @ b
    return g.copy()


@functools.lru_cache(maxsize=None)
def _full_gram(N: int, order: int) -> np.ndarray:
    basis = full_tangent_basis(N, order)
    k = np.arange(-order, order + 1)
    w = (1 + k ** 2)[None, :, None, None]
    flat = basis.reshape(basis.shape[0], -1)
    wflat = (basis * w).reshape(basis.shape[0], -1)
    g = (flat.conj() @ wflat.T).real
    g = 0.5 * (g + g.T)
    g.setflags(write=False)
    return g


# -- retraction ---------------------------------------------------------

def _polar(samples: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(samples)
    if s.min() < SINGULAR_TOL:
        raise RetractionError(f"singular sample matrix (sigma_min = {s.min():.2e})")
    q = u @ vh
    N = samples.shape[-1]
    det = np.linalg.det(q)
    return q / (det ** (1.0 / N))[:, None, None]


@functools.lru_cache(maxsize=None)
def _coefficient_perturbations(N: int, order: int) -> np.ndarray:
    """Sampled real-coordinate perturbations ``phi_k(theta_s) E_ab {1, i}``.

    Shape (P, M, N, N) with P = 2 (2n+1) N^2, ordered (re block, im block).
    """
    m = grid_size(order)
    ph = _phases(order, m)                              # (m, K)
    K = 2 * order + 1
    eye = np.eye(N * N).reshape(N * N, N, N)
    d = np.einsum("sk,pab->kpsab", ph, eye).reshape(K * N * N, m, N, N)
    out = np.concatenate([d, 1j * d])
    out.setflags(write=False)
    return out


def _to_real(coeffs: np.ndarray) -> np.ndarray:
    flat = coeffs.reshape(-1)
    return np.concatenate([flat.real, flat.imag])


def _from_real(x: np.ndarray, N: int, order: int) -> np.ndarray:
    h = x.size // 2
    return (x[:h] + 1j * x[h:]).reshape(2 * order + 1, N, N)


def constraint_residual(coeffs: np.ndarray) -> np.ndarray:
    """Stacked real residual of ``g^H g = I`` and ``det g = 1`` on the grid."""
    order = (coeffs.shape[0] - 1) // 2
    N = coeffs.shape[1]
    g = synthesize(coeffs, grid_size(order))
    h = np.conj(np.swapaxes(g, 1, 2)) @ g - np.eye(N)
    det = np.linalg.det(g) - 1.0
    return np.concatenate([h.real.ravel(), h.imag.ravel(), det.real, det.imag])


def constraint_jacobian(coeffs: np.ndarray) -> np.ndarray:
    """Jacobian of :func:`constraint_residual` w.r.t. real coefficient coordinates."""
    order = (coeffs.shape[0] - 1) // 2
    N = coeffs.shape[1]
    g = synthesize(coeffs, grid_size(order))
    d = _coefficient_perturbations(N, order)            # (P, M, N, N)
    x = np.conj(np.swapaxes(g, 1, 2))[None] @ d
    dh = x + np.conj(np.swapaxes(x, 2, 3))
    det = np.linalg.det(g)
    ginv = np.linalg.inv(g)
    ddet = det[None, :] * np.einsum("sba,psab->ps", ginv, d)
    P = d.shape[0]
    return np.concatenate([
        dh.real.reshape(P, -1), dh.imag.reshape(P, -1), ddet.real, ddet.imag,
    ], axis=1).T


def _normal_parts(j: np.ndarray, rcond: float, floor: float = 0.0):
    """Eigenpairs of ``J^T J`` above the cutoff ``max(rcond s_max, floor)^2``.

    Returns ``(v, lam)`` with the kept eigenvectors as columns; ``lam`` are
    squared singular values of ``J``.  Working with the small normal matrix
    is much cheaper than an SVD of the tall Jacobian.
    """
    try:
        lam, v = np.linalg.eigh(j.T @ j)
    except np.linalg.LinAlgError as exc:
        raise RetractionError(f"constraint Jacobian: {exc}") from exc
    cut = max(rcond * np.sqrt(max(lam[-1], 0.0)), floor) ** 2
    keep = lam > cut
    return v[:, keep], lam[keep]


def retract_coeffs(raw: np.ndarray, order: int | None = None, *, tol: float = 1e-13,
                   max_newton: int = 60, rcond: float = 1e-7, hint=None) -> np.ndarray:
    """Map raw Fourier data to a nearby based SU(N) loop of the given order.

    Per-sample polar projection (rescaled to det 1), truncation to ``order``,
    then Gauss-Newton polishing of the unitarity and determinant equations
    with minimum-norm steps, then right translation so that ``gamma(0) = I``.

    ``hint`` may carry ``(J, v, lam)`` from :meth:`FreeLoop.constraint_parts`
    of a nearby valid loop; the polishing then starts as a chord iteration
    with that Jacobian and only refactors when the contraction degrades.
    """
    raw = np.asarray(raw, dtype=complex)
    if not np.all(np.isfinite(raw)):
        raise RetractionError("non-finite loop coefficients")
    n_raw = (raw.shape[0] - 1) // 2
    n = n_raw if order is None else order
    N = raw.shape[1]
    m = max(grid_size(n), 2 * n_raw + 1)
    c = analyze(_polar(synthesize(raw, m)), n)
    res = constraint_residual(c)
    r = np.linalg.norm(res)
    if not np.isfinite(r):
        raise RetractionError("non-finite constraint residual")
    it = 0
    parts = hint
    while np.abs(res).max() > tol:
        if it >= max_newton:
            raise RetractionError(f"Newton polishing stalled at residual {np.abs(res).max():.2e}")
        if parts is None:
            # Off the constraint set the equations pick up spurious singular
            # values of size O(distance); steps along them overshoot, so they
            # are cut at a level that shrinks with the residual.
            jac = constraint_jacobian(c)
            parts = (jac,) + _normal_parts(jac, rcond, 0.1 * np.sqrt(r))
        jac, v, lam = parts
        step = _from_real(v @ ((v.T @ (jac.T @ res)) / lam), N, n)
        # backtracking on the residual norm
        a = 1.0
        for _ in range(12):
            trial = c - a * step
            new = constraint_residual(trial)
            r_new = np.linalg.norm(new)
            if r_new < r * (1 - 1e-4 * a) or np.abs(new).max() <= tol:
                break
            a *= 0.5
        else:
            if parts is not None and hint is not None and parts[0] is hint[0]:
                parts = None        # stale Jacobian; retry with a fresh one
                it += 1
                continue
            raise RetractionError(f"Newton polishing cannot reduce residual {r:.2e}")
        if r_new > 0.1 * r:
            parts = None
        c, res, r = trial, new, r_new
        it += 1
    base = c.sum(axis=0)
    if np.linalg.svd(base, compute_uv=False).min() < SINGULAR_TOL:
        raise RetractionError("gamma(0) is singular")
    return c @ np.linalg.inv(base)


def retract(raw, order: int | None = None, **kw) -> AlgebraicLoop:
    """Retraction of raw Fourier data (array or loop) onto based loops."""
    if isinstance(raw, FreeLoop):
        raw = raw.coeffs
    c = retract_coeffs(raw, order, **kw)
    loop = AlgebraicLoop(c, check=False)
    try:
        loop.validate()
    except LoopError as exc:
        raise RetractionError(str(exc)) from exc
    return loop


def free_tangent_projector(loop: FreeLoop, rcond: float = 1e-6) -> np.ndarray:
    """Orthogonal projector onto the tangent space of order-n SU(N) loops.

    In real coefficient coordinates; this is the derivative of the Newton
    polishing in :func:`retract_coeffs` at a point of the constraint set.
    """
    _, v, _ = loop.constraint_parts(rcond)
    return np.eye(v.shape[0]) - v @ v.T


# -- random loops -------------------------------------------------------

def random_based_tangent(N: int, order: int, rng: np.random.Generator,
                         scale: float = 1.0) -> np.ndarray:
    """Based su(N)-valued series with Gaussian modes of std ``scale/(1+k^2)``."""
    c = np.zeros((2 * order + 1, N, N), dtype=complex)
    for k in range(1, order + 1):
        z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
        z = z - np.trace(z) * np.eye(N) / N
        z *= scale / (1 + k * k)
        c[order + k] = z
        c[order - k] = -z.conj().T
    c[order] = -c.sum(axis=0)
    return c


def exp_tangent_samples(xi: np.ndarray, m: int) -> np.ndarray:
    """Pointwise exponential of an su(N)-valued series on an m-point grid."""
    x = project_algebra(synthesize(xi, m))
    w, v = np.linalg.eigh(-1j * x)
    return np.einsum("sab,sb,scb->sac", v, np.exp(1j * w), v.conj())


def random_loop(N: int, order: int, rng: np.random.Generator, scale: float = 1.0,
                max_tries: int = 100) -> AlgebraicLoop:
    """Random based loop: exponentiate a random tangent, then retract."""
    m = grid_size(order)
    for _ in range(max_tries):
        xi = random_based_tangent(N, order, rng, scale)
        samples = exp_tangent_samples(xi, m)
        try:
            return retract(analyze(samples, order), order)
        except RetractionError:
            continue
    raise RetractionError(f"no valid random loop after {max_tries} tries")


def elementary_loop(P: np.ndarray, sign: int = 1) -> np.ndarray:
    """Coefficients of ``z^{+-1} P + (I - P)`` for an orthogonal projector P."""
    N = P.shape[0]
    c = np.zeros((3, N, N), dtype=complex)
    c[1 + sign] = P
    c[1] += np.eye(N) - P
    return c


def random_product_loop(N: int, order: int, rng: np.random.Generator) -> AlgebraicLoop:
    """Generic order-n loop as a product of rank-one elementary loops.

    ``order`` factors with ``z`` and ``order`` with ``z^-1`` keep the Fourier
    support in ``[-order, order]`` and the determinant equal to one.
    """
    from .liegroup import random_su

    c = np.eye(N, dtype=complex)[None]
    for _ in range(order):
        for sign in (1, -1):
            u = random_su(N, rng)[:, 0]
            c = multiply(c, elementary_loop(np.outer(u, u.conj()), sign))
            c = pad(c, min((c.shape[0] - 1) // 2, order))
    c = pad(c, order)
    return AlgebraicLoop(c @ np.linalg.inv(c.sum(axis=0)))


def loads(text: str, based: bool = True) -> FreeLoop:
    cls = AlgebraicLoop if based else FreeLoop
    return cls.from_json(json.loads(text))


def dumps(loop: FreeLoop) -> str:
    return json.dumps(loop.to_json())
