"""Gradient flows, level-set projections and the connectivity probe.

All gradients are H^1 gradients in chart coordinates (see :mod:`moment`).
A level of the moment map is described through an admissible basis
``xi_1 = (0, 1)``, ``xi_j = (rho_j, 1)`` of t + R and the functions
``h_j = <mu, xi_j>``; projecting onto ``h_j = a_j`` follows the normalized
field ``-grad h_j / |grad h_j|^2``, along which ``h_j`` drops at unit rate.
"""
from __future__ import annotations

import dataclasses
import itertools
from typing import Sequence

import numpy as np

from . import loops as L
from . import moment as M
from .liegroup import LatticeVector, TorusVector, enumerate_lattice, is_admissible, is_regular

NEAR_CRITICAL = 1e-8
REGULAR_THRESHOLD = 1e-6


class FlowError(RuntimeError):
    pass


class NearCriticalError(FlowError):
    pass


class RegularityError(FlowError):
    pass


class ProjectionError(FlowError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


@dataclasses.dataclass(frozen=True)
class FlowConfig:
    step: float = 0.5
    max_time: float = 200.0
    tol_grad: float = 1e-6
    tol_level: float = 1e-8
    max_iters: int = 200
    integrator: str = "euler"   # or "rk4"
    max_halvings: int = 20
    step_tol: float = 1e-6      # allowed increase of f per step

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not (self.tol_grad > 0 and self.tol_level > 0 and self.step_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_time <= 0 or self.max_iters <= 0:
            raise ValueError("max_time and max_iters must be positive")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @classmethod
    def from_mapping(cls, data: dict):
        names = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for key, value in data.items():
            if key not in names:
                continue
            default = getattr(cls, key)
            kw[key] = type(default)(value) if not isinstance(default, str) else str(value)
        return cls(**kw)


@dataclasses.dataclass
class FlowTrace:
    times: list
    states: list
    values: list
    grad_norms: list
    status: str = "running"

    def append(self, t, loop, f, g):
        self.times.append(float(t))
        self.states.append(loop)
        self.values.append(float(f))
        self.grad_norms.append(float(g))

    @property
    def final(self) -> L.AlgebraicLoop:
        return self.states[-1]

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    def to_csv(self) -> str:
        rows = ["time,f,gradnorm"]
        rows += [f"{t:.17g},{f:.17g},{g:.17g}"
                 for t, f, g in zip(self.times, self.values, self.grad_norms)]
        return "\n".join(rows) + "\n"


# -- downward flow ----------------------------------------------------------

def _euler(loop, f, grad, dt, metric):
    return M.chart_step(loop, -grad.coords, dt, metric)


def _rk4(loop, f, grad, dt, metric):
    k1 = -grad.coords
    y2 = M.chart_step(loop, k1, dt / 2, metric)
    k2 = -M.gradient(f, y2, metric).coords
    y3 = M.chart_step(loop, k2, dt / 2, metric)
    k3 = -M.gradient(f, y3, metric).coords
    y4 = M.chart_step(loop, k3, dt, metric)
    k4 = -M.gradient(f, y4, metric).coords
    return M.chart_step(loop, (k1 + 2 * k2 + 2 * k3 + k4) / 6, dt, metric)


def flow_down(loop: L.AlgebraicLoop, f: M.Objective, cfg: FlowConfig = FlowConfig()) -> FlowTrace:
    """Integrate ``d gamma/dt = -grad f`` with retraction after every step.

    A step that raises ``f`` by more than ``cfg.step_tol`` (or whose
    retraction fails) is retried with half the step, at most
    ``cfg.max_halvings`` times.  After an accepted step the step size grows
    back towards ``cfg.step``.
    """
    metric = M.h1_metric(loop.N, loop.order)
    step_fn = _rk4 if cfg.integrator == "rk4" else _euler
    trace = FlowTrace([], [], [], [])
    t, dt = 0.0, cfg.step
    fval = f.value(loop)
    while True:
        grad = M.gradient(f, loop, metric)
        trace.append(t, loop, fval, grad.norm)
        if grad.norm < cfg.tol_grad:
            trace.status = "converged"
            return trace
        if t >= cfg.max_time:
            trace.status = "max-time"
            return trace
        for _ in range(cfg.max_halvings + 1):
            try:
                new = step_fn(loop, f, grad, dt, metric)
            except L.RetractionError:
                dt /= 2
                continue
            fnew = f.value(new)
            if fnew <= fval + cfg.step_tol:
                break
            dt /= 2
        else:
            trace.status = "retraction-failure"
            return trace
        loop, fval, t = new, fnew, t + dt
        dt = min(cfg.step, 1.5 * dt)


def classify_critical(loop: L.AlgebraicLoop, tol: float = 1e-3) -> LatticeVector | None:
    """Norm class of the critical manifold an energy-critical loop lies on.

    Returns the dominant lattice vector ``lam`` minimizing
    ``|E - |lam|^2/2|``, or None when no class is within ``tol``.
    """
    e = M.energy(loop)
    radius = np.sqrt(2 * max(e, 0.0)) + 1.0
    best, gap = None, np.inf
    for lam in enumerate_lattice(radius, loop.N):
        d = abs(e - 0.5 * lam.norm_sq())
        if d < gap - 1e-15:
            best, gap = lam.dominant(), d
    return best if gap < tol else None


def critical_values(radius: float, N: int = 2) -> list[float]:
    vals = sorted({0.5 * x.norm_sq() for x in enumerate_lattice(radius, N)})
    return [float(v) for v in vals]


# -- level functions and admissible bases ------------------------------------

@dataclasses.dataclass(frozen=True)
class AdmissibleBasis:
    """``xi_1 = (0, 1)`` and ``xi_j = (X_j / q_j, 1)`` for j >= 2."""
    lattice: tuple          # X_j, j = 2..k
    q: tuple                # q_j
    N: int

    def __post_init__(self):
        if len(self.lattice) != self.N - 1 or len(self.q) != self.N - 1:
            raise ValueError("an admissible basis of t + R has N elements")
        for x, q in zip(self.lattice, self.q):
            if not is_admissible(x, q):
                raise ValueError(f"{x}/{q} is not admissible")
        if abs(np.linalg.det(self.matrix())) < 1e-12:
            raise ValueError("basis elements are linearly dependent")

    @property
    def k(self) -> int:
        return self.N

    def covectors(self) -> list[M.CovectorTR]:
        out = [M.CovectorTR(TorusVector([0.0] * self.N), 1.0)]
        for x, q in zip(self.lattice, self.q):
            out.append(M.CovectorTR(x.scaled(1.0 / q), 1.0))
        return out

    def matrix(self) -> np.ndarray:
        """Rows are ``(rho chart, tau)`` of each covector."""
        rows = [np.append(np.zeros(self.N - 1), 1.0)]
        for x, q in zip(self.lattice, self.q):
            rows.append(np.append(np.array(x.chart, float) / q, 1.0))
        return np.array(rows)

    def levels(self, mu: M.MomentValue) -> np.ndarray:
        return np.array([M.pair(mu, c) for c in self.covectors()])

    def to_json(self):
        return {"N": self.N, "X": [list(x.coords) for x in self.lattice], "q": list(self.q)}


@dataclasses.dataclass
class LocalFrame:
    """Chart differentials and gradients of the moment components at a loop."""
    loop: L.AlgebraicLoop
    metric: M.H1Metric
    dE: np.ndarray
    dP: np.ndarray

    @classmethod
    def at(cls, loop, metric=None):
        metric = metric or M.h1_metric(loop.N, loop.order)
        dE, dP = M.moment_gradients(loop, metric)
        return cls(loop, metric, dE, dP)

    def differential(self, xi: M.CovectorTR) -> np.ndarray:
        return M.component_differential(xi, self.dE, self.dP)

    def gradient(self, xi: M.CovectorTR) -> np.ndarray:
        return self.metric.solve(self.differential(xi))

    def moment_singular_values(self) -> np.ndarray:
        """Singular values of the gradients of (E, p chart coordinates)."""
        N = self.loop.N
        rows = [self.dE]
        for i in range(N - 1):
            rho = np.zeros(N)
            rho[i], rho[-1] = 1.0, -1.0
            rows.append(self.differential(M.CovectorTR(TorusVector(rho), 0.0)))
        d = np.array(rows)
        gram = d @ self.metric.solve(d.T)
        return np.sqrt(np.clip(np.linalg.eigvalsh(gram), 0.0, None))[::-1]


def _check_regular(frame: LocalFrame, threshold: float):
    s = frame.moment_singular_values()
    if s[-1] <= threshold:
        raise RegularityError(f"moment map is not submersive here (sigma_min = {s[-1]:.3e})")
    return s


def find_admissible_basis(loop: L.AlgebraicLoop, threshold: float = 1e-3,
                          regular_threshold: float = REGULAR_THRESHOLD,
                          max_norm: float = 10.0, max_q: int = 50) -> AdmissibleBasis:
    """Greedy search for an admissible basis adapted to ``loop``.

    Candidates ``X`` run through regular lattice vectors by increasing norm
    and ``q`` through odd integers ``3, 5, ...``; ``(X/q, 1)`` is accepted as
    ``xi_j`` when it is independent of the earlier elements and
    ``|<v_j, p_1 ... p_{j-1} v_j>| > threshold |v_j|^2`` with ``p_i`` the
    orthogonal projection onto ``v_i^perp`` and ``v_i = grad h_i``.
    """
    frame = LocalFrame.at(loop)
    _check_regular(frame, regular_threshold)
    metric = frame.metric
    N = loop.N
    one = M.CovectorTR(TorusVector([0.0] * N), 1.0)
    vs = [frame.gradient(one)]
    rows = [np.append(np.zeros(N - 1), 1.0)]
    chosen, qs = [], []
    candidates = [x for x in enumerate_lattice(max_norm, N) if is_regular(x)]

    def project_all(w):
        for v in reversed(vs):
            w = w - metric.inner(w, v) / metric.inner(v, v) * v
        return w

    tried = 0
    for _ in range(N - 1):
        found = False
        for x, q in itertools.product(candidates, range(3, max_q, 2)):
            if not is_admissible(x, q):
                continue
            tried += 1
            row = np.append(np.array(x.chart, float) / q, 1.0)
            if np.linalg.matrix_rank(np.array(rows + [row]), tol=1e-12) < len(rows) + 1:
                continue
            v = frame.gradient(M.CovectorTR(x.scaled(1.0 / q), 1.0))
            vv = metric.inner(v, v)
            if abs(metric.inner(v, project_all(v))) > threshold * vv:
                vs.append(v)
                rows.append(row)
                chosen.append(x)
                qs.append(q)
                found = True
                break
        if not found:
            raise FlowError(f"no admissible basis element found after {tried} candidates "
                            f"(|X| <= {max_norm}, q < {max_q}, threshold {threshold})")
    return AdmissibleBasis(tuple(chosen), tuple(qs), N)


# -- projections --------------------------------------------------------------

def _h(loop, xi):
    return M.pair(M.moment(loop), xi)


def project_to_level(loop: L.AlgebraicLoop, j: int, a_j: float, basis: AdmissibleBasis,
                     cfg: FlowConfig = FlowConfig(), max_substeps: int = 100,
                     return_steps: bool = False):
    """Move ``loop`` onto ``h_j = a_j`` along ``Y_j = -grad h_j / |grad h_j|^2``.

    Each substep integrates ``Y_j`` over ``min(remaining time, cfg.step)``
    with one Euler step plus retraction; the remaining time
    ``h_j(current) - a_j`` is re-measured after every substep, which absorbs
    the discretization error of the unit rate.
    """
    xi = basis.covectors()[j]
    metric = M.h1_metric(loop.N, loop.order)
    cur = loop
    r = _h(cur, xi) - a_j
    steps = 0
    while abs(r) >= cfg.tol_level:
        if steps >= max_substeps:
            raise ProjectionError(f"level {j} not reached, residual {r:.3e}")
        frame = LocalFrame.at(cur, metric)
        d = frame.differential(xi)
        g = metric.solve(d)
        gg = float(d @ g)
        if np.sqrt(max(gg, 0.0)) < NEAR_CRITICAL:
            raise NearCriticalError(f"|grad h_{j}| = {np.sqrt(max(gg, 0)):.2e} near a critical point")
        dt = float(np.clip(r, -cfg.step, cfg.step))
        for _ in range(cfg.max_halvings + 1):
            try:
                new = M.chart_step(cur, -g / gg, dt, metric)
            except L.RetractionError:
                dt /= 2
                continue
            r_new = _h(new, xi) - a_j
            if abs(r_new) < abs(r):
                break
            dt /= 2
        else:
            raise ProjectionError(f"level {j}: no substep reduces the residual {r:.3e}")
        cur, r = new, r_new
        steps += 1
    return (cur, steps) if return_steps else cur


@dataclasses.dataclass
class JointProjection:
    loop: L.AlgebraicLoop
    iterations: int
    history: list


def level_targets(a: M.MomentValue, basis: AdmissibleBasis) -> np.ndarray:
    return basis.levels(a)


def project_to_joint_level(loop: L.AlgebraicLoop, a: M.MomentValue, basis: AdmissibleBasis,
                           cfg: FlowConfig = FlowConfig()) -> JointProjection:
    """Cyclic projections ``pi_1, ..., pi_k`` until every level is met.

    Raises :class:`ProjectionError` (carrying the residual history) when
    ``cfg.max_iters`` sweeps do not bring ``max_j |h_j - a_j|`` below
    ``cfg.tol_level``.
    """
    targets = level_targets(a, basis)
    cur = loop
    history = []
    for it in range(cfg.max_iters + 1):
        res = float(np.max(np.abs(basis.levels(M.moment(cur)) - targets)))
        history.append(res)
        if res < cfg.tol_level:
            return JointProjection(cur, it, history)
        if it == cfg.max_iters:
            break
        for j in range(basis.k):
            try:
                cur = project_to_level(cur, j, targets[j], basis, cfg)
            except FlowError as exc:
                raise ProjectionError(f"sweep {it}, level {j}: {exc}", history) from exc
    raise ProjectionError(f"no convergence in {cfg.max_iters} sweeps (residual {history[-1]:.3e})",
                          history)


# -- connectivity probe ---------------------------------------------------------

def _h1_distance(a: L.FreeLoop, b: L.FreeLoop) -> float:
    return float(np.sqrt(L.h1_norm_sq(a.coeffs - b.coeffs)))


def _near_antipodal(a: L.AlgebraicLoop, b: L.AlgebraicLoop, m: int, tol: float = 1e-8) -> bool:
    g = np.linalg.solve(a.samples(m), b.samples(m))
    w = np.linalg.eigvals(g)
    return bool(np.min(np.abs(w + 1.0)) < tol)


def interpolate(a: L.AlgebraicLoop, b: L.AlgebraicLoop, s: float) -> L.AlgebraicLoop:
    """Pointwise geodesic ``a(theta) exp(s log(a(theta)^-1 b(theta)))``, retracted."""
    n = a.order
    m = L.grid_size(n)
    ga = a.samples(m)
    rel = np.linalg.solve(ga, b.samples(m))
    w, v = np.linalg.eig(rel)
    logw = np.log(w)
    step = np.einsum("sab,sb,sbc->sac", v, np.exp(s * logw), np.linalg.inv(v))
    return L.retract(L.analyze(ga @ step, n), n)


@dataclasses.dataclass
class EdgeResult:
    u: int
    v: int
    ok: bool
    steps: int
    via: int | None = None
    reason: str = ""


@dataclasses.dataclass
class ProbeResult:
    components: int
    samples: list
    edges: list
    target: M.MomentValue
    basis: AdmissibleBasis | None
    status: str = "ok"

    def witness_graph(self) -> dict:
        return {
            "target": self.target.to_json(),
            "nodes": len(self.samples),
            "components": self.components,
            "status": self.status,
            "edges": [dataclasses.asdict(e) for e in self.edges],
        }


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[max(ri, rj)] = min(ri, rj)
        return True

    def count(self):
        return len({self.find(i) for i in range(len(self.parent))})


def _walk(a, b, target, basis, cfg, resolution, tube, jump):
    # Each step moves the last projected point 1/(steps left) of the way
    # towards b along the pointwise geodesic, so the path stays close to the
    # level and every reprojection starts nearby.
    prev = a
    for i in range(1, resolution + 1):
        try:
            raw = interpolate(prev, b, 1.0 / (resolution - i + 1)) if i < resolution else b
            proj = project_to_joint_level(raw, target, basis, cfg).loop
        except (FlowError, L.RetractionError) as exc:
            return False, i, str(exc)
        if M.moment(proj).distance(target) >= tube:
            return False, i, "left the tube around the level"
        if _h1_distance(proj, prev) > jump:
            return False, i, "projected path jumped"
        prev = proj
    return True, resolution, ""


def connect(samples, i, j, target, basis, cfg, resolution, rng, jump_factor=8.0):
    """Try to join samples i and j by a reprojected path inside the level."""
    a, b = samples[i], samples[j]
    tube = 10 * cfg.tol_level
    m = L.grid_size(a.order)
    jump = max(jump_factor * _h1_distance(a, b) / resolution, 1e-6)
    if _near_antipodal(a, b, m):
        others = [k for k in range(len(samples)) if k not in (i, j)]
        if not others:
            return EdgeResult(i, j, False, 0, None, "antipodal samples and no midpoint")
        k = others[int(rng.integers(len(others)))]
        ok1, s1, r1 = _walk(a, samples[k], target, basis, cfg, resolution, tube, jump)
        ok2, s2, r2 = (_walk(samples[k], b, target, basis, cfg, resolution, tube, jump)
                       if ok1 else (False, 0, ""))
        return EdgeResult(i, j, ok1 and ok2, s1 + s2, k, r1 or r2)
    ok, steps, reason = _walk(a, b, target, basis, cfg, resolution, tube, jump)
    return EdgeResult(i, j, ok, steps, None, reason)


def _basis_with_fallback(loop, thresholds):
    err = None
    for thr in thresholds:
        try:
            return find_admissible_basis(loop, threshold=thr)
        except RegularityError:
            raise
        except FlowError as exc:
            err = exc
    raise err


def sample_level(target: M.MomentValue, N: int, n: int, count: int, rng: np.random.Generator,
                 cfg: FlowConfig = FlowConfig(), pool: int | None = None,
                 scales: Sequence[float] = (0.5, 1.0, 1.5, 2.0, 3.0),
                 basis: AdmissibleBasis | None = None,
                 thresholds: Sequence[float] = (0.9, 0.8, 0.7, 0.6, 0.3, 1e-3)):
    """Random loops on ``mu^-1(target)``.

    Seeds are drawn from a pool of random loops, nearest to the target in
    moment space first, and joint-projected; seeds that fail to project or sit
    at non-regular points are skipped.  Without a given basis, one is searched
    at the first usable seed, trying ``thresholds`` in turn: cyclic projection
    contracts faster the closer the gradients of the h_j are to orthogonal.
    """
    pool = pool or max(8 * count, 200)
    seeds = []
    for i in range(pool):
        try:
            g = L.random_loop(N, n, rng, scale=scales[i % len(scales)])
        except L.RetractionError:
            continue
        seeds.append((M.moment(g).distance(target), i, g))
    seeds.sort(key=lambda t: (t[0], t[1]))
    out = []
    for _, _, g in seeds:
        if len(out) >= count:
            break
        try:
            if basis is None:
                basis = _basis_with_fallback(g, thresholds)
            proj = project_to_joint_level(g, target, basis, cfg).loop
            _check_regular(LocalFrame.at(proj), REGULAR_THRESHOLD)
        except (FlowError, L.RetractionError):
            continue
        if any(_h1_distance(proj, q) < 1e-9 for q in out):
            continue
        out.append(proj)
    return out, basis


def probe_connectivity(target: M.MomentValue, n: int, samples: int, cfg: FlowConfig = FlowConfig(),
                       N: int = 2, seed: int = 0, resolution: int = 64,
                       neighbours: int = 6) -> ProbeResult:
    """Sample ``mu^-1(target)`` and count components of a witness graph.

    Candidate edges are tried in order of increasing H^1 distance, skipping
    pairs already joined (Kruskal); each sample tries at most ``neighbours``
    of its nearest partners.  A successful edge is a path of ``resolution``
    pointwise-geodesic steps, each joint-projected back onto the level.
    """
    rng = np.random.default_rng(seed)
    pts, basis = sample_level(target, N, n, samples, rng, cfg)
    if not pts:
        return ProbeResult(0, [], [], target, basis, "empty")
    uf = _UnionFind(len(pts))
    pairs = []
    for i in range(len(pts)):
        d = sorted((_h1_distance(pts[i], pts[j]), j) for j in range(len(pts)) if j != i)
        pairs += [(dist, min(i, j), max(i, j)) for dist, j in d[:neighbours]]
    pairs = sorted(set(pairs))
    edges = []
    for dist, i, j in pairs:
        if uf.find(i) == uf.find(j):
            continue
        e = connect(pts, i, j, target, basis, cfg, resolution, rng)
        edges.append(e)
        if e.ok:
            uf.union(i, j)
        if uf.count() == 1:
            break
    return ProbeResult(uf.count(), pts, edges, target, basis)
