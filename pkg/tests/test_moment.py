import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopmoment import loops as L
from loopmoment import moment as M
from loopmoment.liegroup import LatticeVector, TorusVector, random_torus_element

seeds = st.integers(0, 2**32 - 1)


def _random(seed, N=2, order=2, scale=1.0):
    rng = np.random.default_rng(seed)
    if N == 3:
        return L.random_product_loop(3, order, rng)
    return L.random_loop(N, order, rng, scale=scale)


def test_constant_loop_moment():
    mu = M.moment(L.constant_loop(2, 2))
    assert mu.E == pytest.approx(0, abs=1e-15)
    assert np.allclose(mu.p.array(), 0)


@pytest.mark.parametrize("x", [[1, -1], [2, -2], [-3, 3], [1, 0, -1], [2, -1, -1]])
def test_lattice_loop_moment(x):
    lam = LatticeVector(x)
    mu = M.moment(L.lattice_loop(lam))
    assert mu.E == pytest.approx(0.5 * lam.norm_sq(), rel=1e-13)
    assert np.allclose(mu.p.array(), lam.array(), atol=1e-13)


def test_lambda1_energy_is_one():
    assert M.energy(L.lattice_loop(LatticeVector([1, -1]))) == pytest.approx(1.0)


@given(seeds, st.sampled_from([2, 3]), st.integers(1, 3))
def test_fourier_closed_form_matches_quadrature(seed, N, n):
    g = _random(seed, N, n)
    a, b = M.moment(g), M.moment_fourier(g)
    assert a.distance(b) < 1e-10


@given(seeds, st.sampled_from([2, 3]))
def test_tilted_energy_identity(seed, N):
    rng = np.random.default_rng(seed)
    g = _random(seed, N, 2)
    rho = TorusVector(np.append(x := rng.normal(size=N - 1), -x.sum()))
    lhs = M.tilted_energy(g, rho)
    rhs = M.pair(M.moment(g), M.CovectorTR(rho)) + 0.5 * rho.norm_sq()
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_tilted_energy_zero_rho():
    g = _random(3)
    assert M.tilted_energy(g, TorusVector([0.0, 0.0])) == pytest.approx(M.energy(g), abs=1e-14)


@given(seeds, st.floats(0, 2 * np.pi))
def test_invariance_under_torus_and_rotation(seed, s):
    rng = np.random.default_rng(seed)
    g = _random(seed, 2, 2)
    mu = M.moment(g)
    assert M.moment(L.rotate(g, s)).distance(mu) < 1e-10
    t = random_torus_element(2, rng)
    assert M.moment(L.conjugate(g, t)).distance(mu) < 1e-10


@given(seeds)
def test_energy_nonnegative(seed):
    assert M.energy(_random(seed, 2, 3, scale=2.0)) >= 0


def _single_mode(k, a, order):
    sin = np.zeros((2 * order + 1, 2, 2), dtype=complex)
    sin[order + k] = a / 2j
    sin[order - k] = -a / 2j
    cos = np.zeros_like(sin)
    cos[order] = a
    cos[order + k] = -a / 2
    cos[order - k] = -a / 2
    return L.LoopTangent(sin), L.LoopTangent(cos)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_symplectic_single_mode(k):
    a = 1j * np.diag([1.0, -1.0]) / np.sqrt(2)
    xi, eta = _single_mode(k, a, 3)
    # (1/2pi) int -tr(xi' eta) = -k/2 for this pair
    assert M.symplectic_form(xi, eta) == pytest.approx(-k / 2, abs=1e-13)
    assert M.symplectic_form(eta, xi) == pytest.approx(k / 2, abs=1e-13)


@given(seeds)
def test_symplectic_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    xi = L.LoopTangent(L.random_based_tangent(2, 2, rng))
    eta = L.LoopTangent(L.random_based_tangent(2, 2, rng))
    assert M.symplectic_form(xi, eta) == pytest.approx(-M.symplectic_form(eta, xi), abs=1e-12)
    assert M.symplectic_form(xi, xi) == pytest.approx(0, abs=1e-12)


# -- gradients

def test_energy_gradient_at_constant_loop():
    g = M.gradient(M.Energy(), L.constant_loop(2, 2))
    assert g.norm < 1e-12


def test_energy_gradient_at_lattice_loop():
    g = M.gradient(M.Energy(), L.lattice_loop(LatticeVector([1, -1])).padded(2))
    assert g.norm < 1e-10


@pytest.mark.parametrize("N,order,seed", [(2, 1, 0), (2, 2, 1), (3, 1, 2)])
def test_gradient_matches_finite_differences(N, order, seed):
    g = _random(seed, N, order)
    rng = np.random.default_rng(seed)
    rho = TorusVector(np.append(x := rng.normal(size=N - 1), -x.sum()))
    metric = M.h1_metric(N, order)
    for f in (M.Energy(), M.TiltedEnergy(rho), M.MomentComponent(M.CovectorTR(rho, 0.0))):
        exact = M.differential(f, g, metric)
        fd = M._finite_difference_differential(M.FunctionObjective(f.value), g, metric)
        assert np.linalg.norm(exact - fd) <= 1e-6 * max(1.0, np.linalg.norm(exact))


def test_function_objective_uses_finite_differences():
    g = _random(4)
    f = M.FunctionObjective(M.energy)
    assert f.raw_gradient is None
    a = M.gradient(f, g).coords
    b = M.gradient(M.Energy(), g).coords
    assert np.allclose(a, b, atol=1e-6)


def test_descent_direction_lowers_energy():
    g = _random(5)
    grad = M.gradient(M.Energy(), g)
    e0 = M.energy(g)
    e1 = M.energy(M.chart_step(g, -grad.coords, 1e-3))
    assert e1 < e0
    # first order prediction
    assert (e1 - e0) == pytest.approx(-1e-3 * grad.norm ** 2, rel=1e-2)


def test_moment_gradients_combine():
    g = _random(6)
    dE, dP = M.moment_gradients(g)
    rho = TorusVector([0.4, -0.4])
    xi = M.CovectorTR(rho, 1.0)
    want = M.differential(M.TiltedEnergy(rho), g)
    assert np.allclose(M.component_differential(xi, dE, dP), want, atol=1e-12)


def test_metric_is_cached_and_symmetric():
    m = M.h1_metric(2, 2)
    assert m is M.h1_metric(2, 2)
    a, b = np.random.default_rng(0).normal(size=(2, m.dim))
    assert m.inner(a, b) == pytest.approx(m.inner(b, a))
    assert m.norm(a) > 0


def test_moment_value_json():
    mu = M.moment(L.lattice_loop(LatticeVector([1, -1])))
    d = mu.to_json()
    assert d["p"] == pytest.approx([1.0]) and d["E"] == pytest.approx(1.0)
    assert M.MomentValue.from_json(d, 2).distance(mu) < 1e-12
