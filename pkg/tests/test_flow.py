import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loopmoment import flow as F
from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import LatticeVector, TorusVector, random_su

seeds = st.integers(0, 2**32 - 1)


def test_config_validation():
    with pytest.raises(ValueError):
        F.FlowConfig(step=0)
    with pytest.raises(ValueError):
        F.FlowConfig(tol_level=0)
    with pytest.raises(ValueError):
        F.FlowConfig(integrator="leapfrog")
    cfg = F.FlowConfig.from_mapping({"step": "0.25", "max_iters": 7, "unknown": 1})
    assert cfg.step == 0.25 and cfg.max_iters == 7


def test_flow_from_critical_point_stops_immediately():
    g = L.lattice_loop(LatticeVector([1, -1]))
    tr = F.flow_down(g, M.Energy())
    assert tr.status == "converged"
    assert tr.steps == 0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_energy_flow_order1_reaches_critical_value(seed):
    g = L.random_loop(2, 1, np.random.default_rng(seed), scale=2.0)
    tr = F.flow_down(g, M.Energy())
    assert tr.status == "converged"
    e = tr.values[-1]
    assert min(abs(e - m * m) for m in range(4)) < 1e-4
    assert np.all(np.diff(tr.values) <= F.FlowConfig().step_tol)


@settings(max_examples=5)
@given(seeds)
def test_energy_flow_is_monotone(seed):
    g = L.random_loop(2, 2, np.random.default_rng(seed), scale=1.5)
    tr = F.flow_down(g, M.Energy(), F.FlowConfig(max_time=5.0))
    assert np.all(np.diff(tr.values) <= 1e-6)
    assert tr.times == sorted(tr.times)


def test_rk4_flow():
    g = L.random_loop(2, 1, np.random.default_rng(3))
    tr = F.flow_down(g, M.Energy(), F.FlowConfig(integrator="rk4"))
    assert tr.status == "converged"
    assert tr.values[-1] < 1e-8


def test_tilted_flow_decreases():
    g = L.random_loop(2, 2, np.random.default_rng(4))
    f = M.TiltedEnergy(TorusVector([0.3, -0.3]))
    tr = F.flow_down(g, f, F.FlowConfig(max_time=20.0))
    assert tr.values[-1] < tr.values[0]
    assert np.all(np.diff(tr.values) <= 1e-6)


def test_trace_csv():
    tr = F.flow_down(L.lattice_loop(LatticeVector([1, -1])), M.Energy())
    lines = tr.to_csv().splitlines()
    assert lines[0] == "time,f,gradnorm"
    assert len(lines) == 2


def test_classify_critical_examples():
    assert F.classify_critical(L.constant_loop(2, 1)) == LatticeVector([0, 0])
    lam = F.classify_critical(L.lattice_loop(LatticeVector([2, -2])))
    assert lam.norm_sq() == 8
    assert M.energy(L.lattice_loop(LatticeVector([2, -2]))) == pytest.approx(4.0)


def test_classify_conjugated_lambda1(rng):
    g = random_su(2, rng)
    c = L.lattice_loop(LatticeVector([1, -1])).coeffs
    loop = L.AlgebraicLoop(g @ c @ g.conj().T)
    assert F.classify_critical(loop) == LatticeVector([1, -1])


def test_classify_none():
    g = L.random_loop(2, 2, np.random.default_rng(5))
    assert min(abs(M.energy(g) - m * m) for m in range(6)) > 1e-3
    assert F.classify_critical(g) is None


def test_critical_values():
    assert F.critical_values(3.1, 2) == [0.0, 1.0, 4.0]


# -- admissible bases and projections

def test_basis_at_critical_point_is_rejected():
    with pytest.raises(F.RegularityError):
        F.find_admissible_basis(L.lattice_loop(LatticeVector([1, -1])).padded(2))


def test_basis_is_admissible():
    g = L.random_loop(2, 2, np.random.default_rng(6))
    b = F.find_admissible_basis(g)
    assert len(b.covectors()) == 2
    assert abs(np.linalg.det(b.matrix())) > 0
    assert b.to_json()["N"] == 2
    with pytest.raises(ValueError):
        F.AdmissibleBasis((LatticeVector([1, -1]),), (2,), 2)


def test_project_already_on_level():
    g = L.random_loop(2, 2, np.random.default_rng(7))
    b = F.find_admissible_basis(g)
    a = b.levels(M.moment(g))
    out, steps = F.project_to_level(g, 1, a[1], b, return_steps=True)
    assert out is g and steps == 0
    res = F.project_to_joint_level(g, M.moment(g), b)
    assert res.iterations == 0 and res.loop is g


@pytest.mark.parametrize("j", [0, 1])
def test_project_to_level_hits_target(j):
    g = L.random_loop(2, 2, np.random.default_rng(8))
    b = F.find_admissible_basis(g)
    a = b.levels(M.moment(g))[j] + 0.05
    out = F.project_to_level(g, j, a, b)
    assert abs(b.levels(M.moment(out))[j] - a) < 1e-8


def test_joint_projection_small_offset():
    rng = np.random.default_rng(9)
    g = L.random_loop(2, 2, rng)
    b = F._basis_with_fallback(g, (0.9, 0.8, 0.7, 0.6, 0.3, 1e-3))
    mu = M.moment(g)
    target = M.MomentValue(mu.p + TorusVector.from_chart([0.007]), mu.E + 0.007)
    res = F.project_to_joint_level(g, target, b)
    assert M.moment(res.loop).distance(target) < 1e-7
    assert res.history[-1] < 1e-8


def test_joint_projection_reports_history():
    g = L.random_loop(2, 2, np.random.default_rng(10))
    b = F.find_admissible_basis(g)
    mu = M.moment(g)
    target = M.MomentValue(mu.p, mu.E + 0.3)
    with pytest.raises(F.ProjectionError) as info:
        F.project_to_joint_level(g, target, b, F.FlowConfig(max_iters=1))
    assert len(info.value.history) >= 1


# -- probe

def test_interpolate_endpoints():
    rng = np.random.default_rng(11)
    a, b = L.random_loop(2, 2, rng), L.random_loop(2, 2, rng)
    assert np.abs(F.interpolate(a, b, 0.0).coeffs - a.coeffs).max() < 1e-9
    assert np.abs(F.interpolate(a, b, 1.0).coeffs - b.coeffs).max() < 1e-9


def _level_point(seed):
    g = L.random_loop(2, 2, np.random.default_rng(seed))
    b = F._basis_with_fallback(g, (0.9, 0.8, 0.7, 0.6, 0.3, 1e-3))
    return g, b, M.moment(g)


def test_connect_identical_samples():
    g, b, mu = _level_point(12)
    e = F.connect([g, g], 0, 1, mu, b, F.FlowConfig(), 8, np.random.default_rng(0))
    assert e.ok


def test_probe_single_sample():
    res = F.probe_connectivity(M.MomentValue(TorusVector.from_chart([0.3]), 1.6), 2, 1,
                               resolution=8)
    assert res.components == 1
    assert res.witness_graph()["nodes"] == 1


@pytest.mark.slow
def test_probe_few_samples():
    res = F.probe_connectivity(M.MomentValue(TorusVector.from_chart([0.3]), 1.6), 2, 4,
                               resolution=16)
    assert res.components == 1
    for s in res.samples:
        assert M.moment(s).distance(res.target) < 1e-7
