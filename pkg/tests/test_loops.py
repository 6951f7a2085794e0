import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loopmoment import loops as L
from loopmoment.liegroup import LatticeVector, is_group_element, random_torus_element

seeds = st.integers(0, 2**32 - 1)
orders = st.integers(1, 3)


def _random(seed, N=2, order=2, scale=1.0):
    return L.random_loop(N, order, np.random.default_rng(seed), scale=scale)


def test_grid_size():
    assert L.grid_size(1) == 9
    assert L.grid_size(3) == 25


def test_constant_loop_evaluates_to_identity():
    g = L.constant_loop(3, order=2)
    for th in (0.0, 1.3, np.pi):
        assert np.allclose(g(th), np.eye(3))


def test_lattice_loop_su2():
    g = L.lattice_loop(LatticeVector([1, -1]))
    assert np.allclose(g.coeff(1), np.diag([1, 0]))
    assert np.allclose(g.coeff(-1), np.diag([0, 1]))
    assert np.allclose(g(np.pi), -np.eye(2))


def test_lattice_loop_su3():
    g = L.lattice_loop(LatticeVector([1, 0, -1]))
    assert np.allclose(g.coeff(1), np.diag([1, 0, 0]))
    assert np.allclose(g.coeff(0), np.diag([0, 1, 0]))
    assert np.allclose(g.coeff(-1), np.diag([0, 0, 1]))


def test_lattice_loop_zero_is_constant():
    g = L.lattice_loop(LatticeVector([0, 0]))
    assert np.allclose(g(0.7), np.eye(2))


@given(seeds, orders, st.sampled_from([2, 3]))
def test_random_loop_is_valid_and_based(seed, n, N):
    g = _random(seed, N, n)
    assert np.allclose(g(0.0), np.eye(N), atol=1e-12)
    for th in np.random.default_rng(seed).uniform(0, 2 * np.pi, 5):
        assert is_group_element(g(th))


def test_invalid_coefficients_rejected():
    c = np.zeros((3, 2, 2), dtype=complex)
    c[1] = 2 * np.eye(2)
    with pytest.raises(L.LoopError):
        L.AlgebraicLoop(c)


def test_free_loop_is_not_based():
    g = L.near_identity_sequence(3)
    assert not np.allclose(g(0.0), np.eye(2))
    with pytest.raises(L.LoopError):
        L.AlgebraicLoop(g.coeffs)


@given(seeds, st.floats(-7, 7))
def test_rotate_is_based_and_valid(seed, s):
    g = _random(seed)
    r = L.rotate(g, s)
    assert np.allclose(r(0.0), np.eye(2), atol=1e-12)
    th = 0.4
    want = g(th + s) @ np.linalg.inv(g(s))
    assert np.allclose(r(th), want, atol=1e-12)


@given(seeds)
def test_conjugate(seed):
    rng = np.random.default_rng(seed)
    g = _random(seed, 3, 1)
    assert np.allclose(L.conjugate(g, np.eye(3)).coeffs, g.coeffs)
    t = random_torus_element(3, rng)
    c = L.conjugate(g, t)
    assert np.allclose(c(1.1), t @ g(1.1) @ t.conj().T)


def test_log_derivative_examples():
    assert np.allclose(L.log_derivative(L.constant_loop(2, 1)), 0)
    x = LatticeVector([2, -2])
    d = L.log_derivative(L.lattice_loop(x))
    assert np.allclose(d, x.matrix()[None])


@given(seeds)
def test_log_derivative_is_in_algebra(seed):
    d = L.log_derivative(_random(seed, 2, 2))
    assert np.allclose(d, -np.conj(np.swapaxes(d, 1, 2)), atol=1e-10)
    assert np.allclose(np.trace(d, axis1=1, axis2=2), 0, atol=1e-10)


def test_synthesize_analyze_roundtrip(rng):
    c = rng.standard_normal((5, 2, 2)) + 1j * rng.standard_normal((5, 2, 2))
    assert np.allclose(L.analyze(L.synthesize(c, 17), 2), c)


def test_multiply_matches_pointwise(rng):
    a = rng.standard_normal((3, 2, 2)) + 0j
    b = rng.standard_normal((5, 2, 2)) + 0j
    ab = L.multiply(a, b)
    m = 31
    assert np.allclose(L.synthesize(ab, m), L.synthesize(a, m) @ L.synthesize(b, m))


# -- retraction

@given(seeds, orders)
def test_retract_idempotent(seed, n):
    g = _random(seed, 2, n)
    assert np.abs(L.retract(g).coeffs - g.coeffs).max() < 1e-10


@given(seeds, orders)
def test_retract_small_perturbation(seed, n):
    rng = np.random.default_rng(seed)
    g = _random(seed, 2, n)
    raw = g.coeffs + 1e-6 * (rng.standard_normal(g.coeffs.shape) + 1j * rng.standard_normal(g.coeffs.shape))
    r = L.retract(raw, n)
    r.validate()
    assert np.abs(r.coeffs - g.coeffs).max() < 1e-5


def test_retract_zero_samples_fails():
    with pytest.raises(L.RetractionError):
        L.retract(np.zeros((3, 2, 2), dtype=complex))


def test_retract_non_finite_fails():
    c = L.constant_loop(2, 1).coeffs.copy()
    c[0, 0, 0] = np.nan
    with pytest.raises(L.RetractionError):
        L.retract(c)


def test_retract_su3_product_loop(rng):
    g = L.random_product_loop(3, 2, rng)
    assert np.abs(L.retract(g).coeffs - g.coeffs).max() < 1e-10


# -- H1 norm

def test_h1_constant():
    c = np.zeros((3, 2, 2), dtype=complex)
    c[1] = [[1, 2j], [0, -1]]
    assert L.h1_norm_sq(c) == pytest.approx(6.0)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_h1_near_identity_sequence(n):
    g = L.near_identity_sequence(n)
    d = g.coeffs.copy()
    d[n] -= np.eye(2)
    want = 2 * (1 + n * n) / n ** 4 + 2 * (1 - np.sqrt(1 - 1 / n ** 4)) ** 2
    assert L.h1_norm_sq(d) == pytest.approx(want, rel=1e-12)
    assert L.h1_norm_sq_quadrature(d) == pytest.approx(want, rel=1e-12)


def test_h1_near_identity_n2_value():
    d = L.near_identity_sequence(2).coeffs.copy()
    d[2] -= np.eye(2)
    assert L.h1_norm_sq(d) == pytest.approx(0.62701665, abs=1e-8)


@given(seeds, orders)
def test_h1_series_matches_quadrature(seed, n):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((2 * n + 1, 2, 2)) + 1j * rng.standard_normal((2 * n + 1, 2, 2))
    assert L.h1_norm_sq(c) == pytest.approx(L.h1_norm_sq_quadrature(c), rel=1e-12)


@pytest.mark.parametrize("N,order", [(2, 1), (2, 3), (3, 2)])
def test_h1_gram_diagonal(N, order):
    g = L.h1_gram(N=N, order=order)
    d0 = N * N - 1
    want = [1.0] * d0 + [1.0 + k * k for k in range(1, order + 1) for _ in range(2 * d0)]
    assert np.allclose(np.diag(g), want)
    assert np.allclose(g, np.diag(want))


def test_h1_gram_based_positive_definite():
    g = L.h1_gram(N=2, order=2, based=True)
    assert np.allclose(g, g.T)
    assert np.linalg.eigvalsh(g).min() > 0.1
    b = L.based_tangent_basis(2, 2)
    assert np.allclose(b.sum(axis=1), 0)


# -- tangents and serialization

def test_loop_tangent_rejects_non_algebra():
    c = np.zeros((3, 2, 2), dtype=complex)
    c[2] = np.eye(2)
    with pytest.raises(L.LoopError):
        L.LoopTangent(c)


@given(seeds)
def test_json_roundtrip(seed):
    g = _random(seed, 2, 2)
    back = L.loads(L.dumps(g))
    assert np.array_equal(back.coeffs, g.coeffs)
    json.loads(L.dumps(g))
