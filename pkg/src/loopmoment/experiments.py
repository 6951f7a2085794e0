"""Moment-image sampling, the SU(2) hull check, data files and the acceptance suite.

Everything here is deterministic given a manifest: random streams are derived
from the manifest seed and a fixed per-task label, iteration orders are
fixed, and reports contain no timings.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import subprocess
from pathlib import Path
from typing import Callable

import numpy as np

from . import flow as F
from . import grassmann as G
from . import loops as L
from . import moment as M
from .liegroup import TorusVector, enumerate_lattice, random_torus_element


# -- manifest -------------------------------------------------------------------

def git_describe(path: str | os.PathLike | None = None) -> str:
    path = Path(path or Path(__file__).resolve().parent)
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=path,
                             capture_output=True, text=True, timeout=10)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; numbers and lists are typed."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _typed(value)
    return out


def _typed(value: str):
    if "," in value:
        return [_typed(v.strip()) for v in value.split(",") if v.strip()]
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    return value


@dataclasses.dataclass
class ExperimentManifest:
    seed: int = 20240601
    N: int = 2
    # criterion sizes
    critical_radius: float = 5.0
    tilted_loops: int = 100
    tilted_rhos: int = 5
    h1_series: int = 100
    sequence_orders: list = dataclasses.field(default_factory=lambda: list(range(2, 11)))
    invariance_pairs: int = 100
    gradient_pairs: int = 50
    diagram_loops: int = 200
    diagram_max_order: int = 3
    image_samples: int = 10000
    image_order: int = 2
    image_scale: float = 1.0
    flow_loops: int = 50
    flow_max_order: int = 2
    projection_trials: int = 100
    projection_order: int = 2
    projection_offset: float = 0.01
    projection_success: float = 0.95
    probe_targets: list = dataclasses.field(
        default_factory=lambda: [[0.3, 1.6], [0.2, 0.5], [-0.4, 2.8]])
    probe_order: int = 2
    probe_samples: int = 50
    probe_resolution: int = 64
    probe_rerun_factor: int = 4
    basis_thresholds: list = dataclasses.field(default_factory=lambda: [0.9, 0.8, 0.7, 0.6, 0.3, 1e-3])
    # tolerances
    tol_critical: float = 1e-12
    tol_tilted: float = 1e-10
    tol_h1: float = 1e-10
    tol_invariance: float = 1e-8
    tol_gradient: float = 1e-5
    tol_diagram: float = 1e-6
    tol_minor: float = 1e-9
    hull_slack: float = 1e-9
    tol_grad: float = 1e-6
    tol_energy_gap: float = 1e-3
    step_tol: float = 1e-6
    tol_level: float = 1e-8
    max_iters: int = 200
    flow_step: float = 0.5
    fd_step: float = 1e-5
    code_version: str = ""
    output_dir: str = ""

    def __post_init__(self):
        if not self.code_version:
            self.code_version = git_describe()
        self.validate()

    def validate(self):
        for f in dataclasses.fields(self):
            if f.name.startswith("tol_") or f.name in ("step_tol", "fd_step", "flow_step"):
                v = getattr(self, f.name)
                if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                    raise ValueError(f"{f.name} must be a positive number, got {v!r}")
        if self.hull_slack < 0:
            raise ValueError("hull_slack must be nonnegative")
        counts = ["tilted_loops", "tilted_rhos", "h1_series", "invariance_pairs", "gradient_pairs",
                  "diagram_loops", "image_samples", "flow_loops", "projection_trials",
                  "probe_samples", "probe_resolution", "max_iters"]
        for name in counts:
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.N < 2:
            raise ValueError("N must be at least 2")

    def flow_config(self) -> F.FlowConfig:
        return F.FlowConfig(step=self.flow_step, tol_grad=self.tol_grad, tol_level=self.tol_level,
                            max_iters=self.max_iters, step_tol=self.step_tol)

    def rng(self, label: str) -> np.random.Generator:
        """Independent stream for a named task, derived from the manifest seed."""
        key = int.from_bytes(hashlib.sha256(label.encode()).digest()[:8], "little")
        return np.random.default_rng([self.seed, key])

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def from_mapping(cls, data: dict):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
        kw = dict(data)
        if "probe_targets" in kw:
            t = kw["probe_targets"]
            if t and not isinstance(t[0], (list, tuple)):     # flat list from key=value
                t = [list(t[i:i + 2]) for i in range(0, len(t), 2)]
            kw["probe_targets"] = [list(map(float, x)) for x in t]
        for key in ("sequence_orders", "basis_thresholds"):
            if key in kw and not isinstance(kw[key], list):
                kw[key] = [kw[key]]
        return cls(**kw)

    @classmethod
    def load(cls, path: str | os.PathLike):
        text = Path(path).read_text()
        if str(path).endswith(".json"):
            return cls.from_mapping(json.loads(text))
        return cls.from_mapping(parse_config(text))

    def reduced(self) -> "ExperimentManifest":
        """A fast variant with the same seed and tolerances, for repeat runs."""
        return dataclasses.replace(
            self, tilted_loops=10, tilted_rhos=2, h1_series=10, sequence_orders=[2, 3],
            invariance_pairs=10, gradient_pairs=4, diagram_loops=10, image_samples=100,
            flow_loops=2, projection_trials=3, probe_targets=self.probe_targets[:1],
            probe_samples=3, probe_resolution=8, probe_rerun_factor=1)


# -- image sampling and the hull --------------------------------------------------

def sample_image(N: int, n: int, count: int, seed, scale: float = 1.0):
    """Moment values of ``count`` random order-n loops (exp of random tangents, retracted).

    Returns ``(values, failures)``; failed retractions are resampled.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out, failures = [], 0
    m = L.grid_size(n)
    while len(out) < count:
        xi = L.random_based_tangent(N, n, rng, scale)
        try:
            g = L.retract(L.analyze(L.exp_tangent_samples(xi, m), n), n)
        except L.RetractionError:
            failures += 1
            if failures > 10 * count + 100:
                raise
            continue
        out.append(M.moment(g))
    return out, failures


def check_hull_su2(v: M.MomentValue) -> float:
    """Signed distance-like margin of (p_1, E) to the hull of the points (m, m^2).

    ``min_m E - ((2m+1) p - m(m+1))``; the chord through ``(m, m^2)`` and
    ``(m+1, (m+1)^2)`` is the binding facet for ``m = floor(p)`` and the
    range scanned contains it.
    """
    if v.p.N != 2:
        raise ValueError("the parabola hull is specific to SU(2)")
    p = v.p.coords[0]
    lo, hi = math.floor(p) - 1, math.ceil(p) + 1
    return float(min(v.E - ((2 * m + 1) * p - m * (m + 1)) for m in range(lo, hi + 1)))


@dataclasses.dataclass
class HullReport:
    rows: list          # (sample_id, p_1, E, margin)
    slack: float

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if r[3] < -self.slack)

    @property
    def min_margin(self) -> float:
        return min(r[3] for r in self.rows)

    def to_csv(self) -> str:
        return _csv(["sample_id", "p_1", "E", "margin"], self.rows)


def hull_report(values, slack: float = 1e-9) -> HullReport:
    rows = [(i, v.p.coords[0], v.E, check_hull_su2(v)) for i, v in enumerate(values)]
    return HullReport(rows, slack)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def image_csv(values, N: int) -> str:
    """Columns sample_id, p_1..p_{N-1}, E, margin (margin blank unless N = 2)."""
    header = ["sample_id"] + [f"p_{i + 1}" for i in range(N - 1)] + ["E", "margin"]
    rows = []
    for i, v in enumerate(values):
        margin = check_hull_su2(v) if N == 2 else ""
        rows.append([i, *v.p.chart, v.E, margin])
    return _csv(header, rows)


def figure1_data(radius: int, resolution: int, values=()) -> dict:
    """Plot data for the SU(2) moment image as CSV strings keyed by file name.

    * ``vertices.csv``: the points ``(m, m^2)``, ``|m| <= radius``.
    * ``facets.csv``: hull edges between consecutive vertices plus the top edge.
    * ``critical.csv``: critical levels ``E = m^2`` clipped to the hull, i.e.
      ``|p| <= m``, each as ``resolution`` points; an interpretation of the
      critical-value segments, since they are images of the spheres of loops
      ``g lambda_m g^-1``.
    * ``scatter.csv``: sampled moment values with their hull margins.
    """
    radius = int(radius)
    if radius < 0 or resolution < 2:
        raise ValueError("radius must be >= 0 and resolution >= 2")
    ms = list(range(-radius, radius + 1))
    verts = [(m, float(m), float(m * m)) for m in ms]
    facets = [(i, float(a), float(a * a), float(a + 1), float((a + 1) ** 2))
              for i, a in enumerate(ms[:-1])]
    if radius > 0:
        facets.append((len(facets), float(-radius), float(radius ** 2), float(radius), float(radius ** 2)))
    crit = []
    for m in range(0, radius + 1):
        for p in np.linspace(-m, m, resolution):
            crit.append((m, float(p), float(m * m)))
    return {
        "vertices.csv": _csv(["m", "p_1", "E"], verts),
        "facets.csv": _csv(["facet_id", "p_1_start", "E_start", "p_1_end", "E_end"], facets),
        "critical.csv": _csv(["m", "p_1", "E"], crit),
        "scatter.csv": hull_report(values).to_csv() if values else _csv(["sample_id", "p_1", "E", "margin"], []),
    }


def emit_figure1(radius: int, resolution: int, out: str | os.PathLike, samples: int = 0,
                 order: int = 2, seed: int = 0) -> dict:
    """Write the Figure 1 data files into directory ``out``; returns row counts."""
    values = sample_image(2, order, samples, seed)[0] if samples else ()
    files = figure1_data(radius, resolution, values)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    counts = {}
    for name, text in files.items():
        (out / name).write_text(text)
        counts[name] = text.count("\n") - 1
    return counts


# -- acceptance criteria ------------------------------------------------------------

@dataclasses.dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    metrics: dict
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        m = ", ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.id:2d} {self.name}: {m}" + (f" ({self.detail})" if self.detail else "")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


def _random_loop_mix(rng, i, N_choices=((2, 1), (2, 2), (2, 3), (3, 1), (3, 2))):
    N, n = N_choices[i % len(N_choices)]
    if N == 3 and n == 1:
        return L.random_product_loop(N, n, rng)
    return L.random_loop(N, n, rng)


def _random_rho(N, rng, scale=1.0) -> TorusVector:
    x = rng.standard_normal(N) * scale
    return TorusVector(x - x.mean())


def criterion_critical_values(man: ExperimentManifest) -> CriterionResult:
    worst, count = 0.0, 0
    for N in (2, 3):
        for x in enumerate_lattice(man.critical_radius, N):
            worst = max(worst, abs(M.energy(L.lattice_loop(x)) - 0.5 * x.norm_sq()))
            count += 1
    return CriterionResult(1, "critical values E(lattice loop) = |X|^2/2",
                           worst < man.tol_critical, {"max_error": worst, "lattice_points": count})


def criterion_tilted(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("tilted")
    worst = 0.0
    for i in range(man.tilted_loops):
        g = _random_loop_mix(rng, i)
        mu = M.moment(g)
        for _ in range(man.tilted_rhos):
            rho = _random_rho(g.N, rng, 2.0)
            r = M.tilted_energy(g, rho) - M.pair(mu, M.CovectorTR(rho, 1.0)) - 0.5 * rho.norm_sq()
            worst = max(worst, abs(r))
    return CriterionResult(2, "tilted-energy identity", worst < man.tol_tilted,
                           {"max_residual": worst, "cases": man.tilted_loops * man.tilted_rhos})


def criterion_h1(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("h1")
    worst = 0.0
    for i in range(man.h1_series):
        n, N = 1 + i % 5, 2 + i % 2
        c = (rng.standard_normal((2 * n + 1, N, N)) + 1j * rng.standard_normal((2 * n + 1, N, N)))
        a, b = L.h1_norm_sq(c), L.h1_norm_sq_quadrature(c)
        worst = max(worst, abs(a - b) / max(1.0, abs(a)))
    seq_err = 0.0
    for n in man.sequence_orders:
        g = L.near_identity_sequence(n)
        d = g.coeffs - L.pad(np.eye(2, dtype=complex)[None], g.order)
        closed = 2 * (1 + n * n) / n ** 4 + 2 * (1 - math.sqrt(1 - 1 / n ** 4)) ** 2
        seq_err = max(seq_err, abs(L.h1_norm_sq(d) - closed), abs(L.h1_norm_sq_quadrature(d) - closed))
    ok = worst < man.tol_h1 and seq_err < man.tol_h1
    return CriterionResult(3, "H1 Fourier identity and near-identity sequence", ok,
                           {"max_series_error": worst, "max_sequence_error": seq_err})


def criterion_invariance(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("invariance")
    worst = 0.0
    for i in range(man.invariance_pairs):
        g = _random_loop_mix(rng, i)
        t = random_torus_element(g.N, rng)
        s = float(rng.uniform(0, 2 * np.pi))
        moved = L.conjugate(L.rotate(g, s), t)
        worst = max(worst, M.moment(moved).distance(M.moment(g)))
    return CriterionResult(4, "moment-map invariance under T x S^1", worst < man.tol_invariance,
                           {"max_deviation": worst, "pairs": man.invariance_pairs})


def gradient_check(f: M.Objective, g: L.AlgebraicLoop, rng, h: float = 1e-5, directions: int = 3) -> float:
    """Worst relative error of <grad f, eta> against central differences."""
    metric = M.h1_metric(g.N, g.order)
    grad = M.gradient(f, g, metric)
    worst = 0.0
    for _ in range(directions):
        eta = rng.standard_normal(metric.dim)
        an = metric.inner(grad.coords, eta)
        fd = (f.value(M.chart_step(g, eta, h, metric)) - f.value(M.chart_step(g, eta, -h, metric))) / (2 * h)
        worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-300))
    return worst


def criterion_gradient(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("gradient")
    worst = 0.0
    for i in range(man.gradient_pairs):
        g = _random_loop_mix(rng, i)
        kind = i % 3
        if kind == 0:
            f = M.Energy()
        elif kind == 1:
            f = M.TiltedEnergy(_random_rho(g.N, rng))
        else:
            f = M.MomentComponent(M.CovectorTR(_random_rho(g.N, rng), float(rng.standard_normal())))
        worst = max(worst, gradient_check(f, g, rng, man.fd_step))
    return CriterionResult(5, "H1 gradient vs central differences", worst < man.tol_gradient,
                           {"max_relative_error": worst, "pairs": man.gradient_pairs})


def criterion_diagram(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("diagram")
    worst, minor = 0.0, 0.0
    for i in range(man.diagram_loops):
        order = 1 + i % man.diagram_max_order
        n = order + (i // man.diagram_max_order) % (man.diagram_max_order - order + 1)
        g = L.random_loop(2, order, rng)
        point = G.embed(g, n)
        mu_tr = G.grass_moment(point)
        worst = max(worst, mu_tr.distance(M.moment(g)))
        if point.rank <= G.MAX_MINOR_SIZE:
            minor = max(minor, mu_tr.distance(G.grass_moment(point, "pluecker")))
    ok = worst < man.tol_diagram and minor < man.tol_minor
    return CriterionResult(6, "Grassmannian diagram", ok,
                           {"max_residual": worst, "trace_vs_minors": minor, "loops": man.diagram_loops})


def criterion_convexity(man: ExperimentManifest) -> CriterionResult:
    values, failures = sample_image(2, man.image_order, man.image_samples, man.rng("image"), man.image_scale)
    rep = hull_report(values, man.hull_slack)
    ok = rep.violations == 0
    return CriterionResult(7, "convexity probe (parabola hull)", ok,
                           {"min_margin": rep.min_margin, "violations": rep.violations,
                            "samples": len(values), "retraction_failures": failures})


def criterion_flow(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("flow")
    cfg = man.flow_config()
    bad, worst_gap, worst_rise, classes = [], 0.0, -np.inf, {}
    for i in range(man.flow_loops):
        n = 1 + i % man.flow_max_order
        g = L.random_loop(2, n, rng, scale=1.0 + (i % 3))
        tr = F.flow_down(g, M.Energy(), cfg)
        cls = F.classify_critical(tr.final, man.tol_energy_gap)
        e = tr.values[-1]
        gap = min(abs(e - v) for v in F.critical_values(math.sqrt(2 * e) + 2, 2))
        rise = float(np.max(np.diff(tr.values))) if tr.steps else 0.0
        worst_gap, worst_rise = max(worst_gap, gap), max(worst_rise, rise)
        if cls is not None:
            key = str(list(cls.coords))
            classes[key] = classes.get(key, 0) + 1
        if tr.status != "converged" or cls is None or gap >= man.tol_energy_gap or rise > man.step_tol:
            bad.append(i)
    return CriterionResult(8, "energy flow classification", not bad,
                           {"failures": len(bad), "max_energy_gap": worst_gap,
                            "max_step_increase": float(worst_rise), "classes": classes},
                           f"failed runs {bad}" if bad else "")


def _basis(g, man):
    return F._basis_with_fallback(g, man.basis_thresholds)


def criterion_projection(man: ExperimentManifest) -> CriterionResult:
    rng = man.rng("projection")
    cfg = man.flow_config()
    converged, failures, level_bad, monotone_bad = 0, [], 0, 0
    for i in range(man.projection_trials):
        g = L.random_loop(2, man.projection_order, rng)
        d = rng.standard_normal(2)
        d /= np.linalg.norm(d)
        mu = M.moment(g)
        target = M.MomentValue(mu.p + TorusVector.from_chart([man.projection_offset * d[0]]),
                               mu.E + man.projection_offset * d[1])
        try:
            basis = _basis(g, man)
            single = F.project_to_level(g, 0, target.E, basis, cfg)
            if abs(M.energy(single) - target.E) >= man.tol_level:
                level_bad += 1
            res = F.project_to_joint_level(g, target, basis, cfg)
        except (F.FlowError, L.RetractionError) as exc:
            failures.append(f"{i}: {type(exc).__name__}: {exc}")
            continue
        converged += 1
        tail = res.history[-10:]
        if any(b > a for a, b in zip(tail, tail[1:])):
            monotone_bad += 1
    rate = converged / man.projection_trials
    ok = rate >= man.projection_success and level_bad == 0
    return CriterionResult(9, "level and joint-level projection", ok,
                           {"success_rate": rate, "level_violations": level_bad,
                            "non_monotone_tails": monotone_bad, "trials": man.projection_trials},
                           "; ".join(failures))


def criterion_connectivity(man: ExperimentManifest) -> CriterionResult:
    cfg = man.flow_config()
    counts, detail, ok = {}, [], True
    for t_i, (p1, e) in enumerate(man.probe_targets):
        target = M.MomentValue(TorusVector.from_chart([p1]), e)
        seed = int(man.rng(f"probe{t_i}").integers(2 ** 31))
        res = F.probe_connectivity(target, man.probe_order, man.probe_samples, cfg, N=2, seed=seed,
                                   resolution=man.probe_resolution)
        key = f"{p1},{e}"
        counts[key] = res.components
        if res.status == "empty":
            detail.append(f"{key}: empty sampled level")
            ok = False
            continue
        if res.components > 1:
            f = man.probe_rerun_factor
            again = F.probe_connectivity(target, man.probe_order, f * man.probe_samples, cfg, N=2,
                                         seed=seed, resolution=f * man.probe_resolution)
            counts[key + " rerun"] = again.components
            if again.components > 1:
                ok = False
                detail.append(f"{key}: {again.components} components reproduced at {f}x")
            else:
                detail.append(f"{key}: {res.components} components not reproduced at {f}x")
    return CriterionResult(10, "connectivity probe", ok, {"components": counts}, "; ".join(detail))


CRITERIA: dict[int, Callable] = {
    1: criterion_critical_values,
    2: criterion_tilted,
    3: criterion_h1,
    4: criterion_invariance,
    5: criterion_gradient,
    6: criterion_diagram,
    7: criterion_convexity,
    8: criterion_flow,
    9: criterion_projection,
    10: criterion_connectivity,
}


def criterion_determinism(man: ExperimentManifest) -> CriterionResult:
    small = man.reduced()
    a = report_bytes(run_suite(small, criteria=sorted(CRITERIA)))
    b = report_bytes(run_suite(small, criteria=sorted(CRITERIA)))
    ha, hb = hashlib.sha256(a).hexdigest(), hashlib.sha256(b).hexdigest()
    return CriterionResult(11, "determinism of run_suite", a == b, {"sha256": ha[:16], "identical": a == b},
                           "" if a == b else f"hashes differ: {ha[:16]} vs {hb[:16]}")


def run_suite(man: ExperimentManifest, criteria=None, emit: Callable | None = None) -> dict:
    """Run the acceptance criteria in order and return the report."""
    man.validate()
    ids = sorted(criteria) if criteria is not None else sorted(CRITERIA) + [11]
    results = []
    for cid in ids:
        fn = criterion_determinism if cid == 11 else CRITERIA[cid]
        r = fn(man)
        results.append(r)
        if emit:
            emit(r)
    return {
        "manifest": man.to_json(),
        "criteria": [dataclasses.asdict(r) for r in results],
        "passed": all(r.passed for r in results),
    }


def _jsonable(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x)}")


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n").encode()
