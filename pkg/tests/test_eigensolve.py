import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from klkit import kernels
from klkit.counterexamples import analytic_brownian_spectrum, constant_spectrum
from klkit.eigensolve import (
    JacobiNotConverged,
    Spectrum,
    eigen_residual,
    jacobi_eigen,
    nystrom_decompose,
)
from klkit.grid import uniform_grid

from conftest import brownian_lambda


def test_jacobi_examples():
    r = jacobi_eigen([[2.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(r.eigenvalues, [2.0, 1.0])
    r = jacobi_eigen([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(r.eigenvalues, [1.0, -1.0], atol=1e-15)
    v = r.eigenvectors * np.sign(r.eigenvectors[0])
    s = 1 / np.sqrt(2)
    assert np.allclose(v, [[s, s], [s, -s]], atol=1e-15)
    r = jacobi_eigen([[2.0, 1.0], [1.0, 2.0]])
    # roots of (2 - mu)^2 - 1
    assert np.allclose(r.eigenvalues, [3.0, 1.0], atol=1e-15)


def test_jacobi_rejects():
    with pytest.raises(ValueError):
        jacobi_eigen([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        jacobi_eigen(np.ones((2, 3)))
    with pytest.raises(ValueError):
        jacobi_eigen(np.eye(2), tol=0)
    with pytest.raises(ValueError):
        jacobi_eigen([[1.0, np.nan], [np.nan, 1.0]])


def test_jacobi_tiny_and_huge_scales():
    for c in (1e-200, 1e200):
        r = jacobi_eigen(c * np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert np.allclose(r.eigenvalues / c, [2.0, 0.0], atol=1e-15)


def test_jacobi_nonconvergence_carries_offdiag():
    a = np.random.default_rng(1).normal(size=(20, 20))
    with pytest.raises(JacobiNotConverged) as info:
        jacobi_eigen(a + a.T, tol=1e-14, max_sweeps=1)
    assert info.value.offdiag_norm > 0


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 24).flatmap(
        lambda n: arrays(np.float64, (n, n), elements=st.floats(-1e3, 1e3, allow_nan=False))
    )
)
def test_jacobi_properties(m):
    a = m + m.T
    r = jacobi_eigen(a)
    v, mu = r.eigenvectors, r.eigenvalues
    n = a.shape[0]
    s = np.max(np.abs(a), initial=0.0) or 1.0
    norm = s * np.linalg.norm(a / s)
    assert np.all(np.diff(mu) <= 0)
    assert np.abs(v.T @ v - np.eye(n)).max() <= 1e-10
    assert np.linalg.norm(v @ np.diag(mu) @ v.T - a) <= 1e-9 * max(norm, 1e-300) + 1e-300
    assert np.abs(a @ v - v * mu).max(initial=0) <= 1e-8 * norm + 1e-300
    assert r.offdiag_norm <= 1e-12 * norm + 1e-300


def test_jacobi_matches_lapack_on_larger_matrix():
    a = np.random.default_rng(7).normal(size=(150, 150))
    a = a + a.T
    r = jacobi_eigen(a)
    assert np.allclose(r.eigenvalues, np.linalg.eigvalsh(a)[::-1], rtol=0, atol=1e-10 * np.linalg.norm(a))


@pytest.mark.parametrize("x", [0.1, 0.37, 0.8, 1.0])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_sine_pairs_solve_integral_equation(x, k):
    # independent oracle: adaptive quadrature of int_0^1 min(x, y) f_k(y) dy
    w = (k - 0.5) * np.pi
    f = lambda y: np.sqrt(2) * np.sin(w * y)
    lhs = brownian_lambda(k) * f(x)
    rhs = quad(lambda y: min(x, y) * f(y), 0, 1, points=[x], epsabs=1e-13)[0]
    assert lhs == pytest.approx(rhs, abs=1e-11)


def test_brownian_nystrom_eigenvalues(brownian_nystrom_512):
    s = brownian_nystrom_512
    k = np.arange(1, 11)
    assert s.lambdas[0] == pytest.approx(4 / np.pi ** 2, rel=0.01)
    assert np.all(np.abs(s.lambdas * ((k - 0.5) * np.pi) ** 2 - 1) <= 0.02)
    assert s.orthonormality_error() <= 1e-6
    assert s.source == "nystrom"


def test_brownian_nystrom_residual_and_eigenfunction(brownian_nystrom_512):
    s = brownian_nystrom_512
    bm = kernels.brownian()
    assert eigen_residual(s, bm, 1) <= 1e-4
    # sign convention: first significant component positive, as is sin(pi x / 2)
    ref = np.sqrt(2) * np.sin(0.5 * np.pi * s.grid.nodes)
    assert np.abs(s.values[0] - ref).max() < 1e-3


def test_analytic_pair_residual_on_512_grid():
    s = analytic_brownian_spectrum(1, uniform_grid(0, 1, 512))
    assert eigen_residual(s, kernels.brownian(), 1) <= 1e-4


def test_rank_one_kernel():
    g = uniform_grid(0, 1, 37)
    s = nystrom_decompose(kernels.constant(), g, 5)
    assert len(s) == 1
    assert s.lambdas[0] == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(s.values[0], 1.0, atol=1e-13)
    assert eigen_residual(s, kernels.constant(), 1) <= 1e-13
    c = constant_spectrum(g)
    assert eigen_residual(c, kernels.constant(), 1) <= 1e-14


def test_nystrom_preconditions():
    g = uniform_grid(0, 1, 8)
    with pytest.raises(ValueError):
        nystrom_decompose(kernels.brownian(), g, 0)
    with pytest.raises(ValueError):
        nystrom_decompose(kernels.brownian(), g, 3, drop_tol=-1.0)
    with pytest.raises(ValueError):
        nystrom_decompose(kernels.constant(), g, 3, drop_tol=10.0)
    with pytest.raises(ValueError):
        nystrom_decompose(kernels.brownian(), uniform_grid(-1, 1, 8), 3)


def test_grid_convergence_256_to_512(brownian_nystrom_512):
    coarse = nystrom_decompose(kernels.brownian(), uniform_grid(0, 1, 256), 10)
    rel = np.abs(coarse.lambdas / brownian_nystrom_512.lambdas - 1)
    assert rel.max() <= 0.005


def test_catalog_orthonormality_and_positivity(catalog_spectra):
    for k, s in catalog_spectra.values():
        assert s.orthonormality_error() <= 1e-6
        assert np.all(s.lambdas > 0)
        assert np.all(np.diff(s.lambdas) <= 0)


def test_degenerate_kernel_projector():
    # K = cos(2 pi (x - y)) on [0, 1): eigenvalue 1/2 twice; only the projector is defined
    k = kernels.custom("cos2pi", lambda x, y: np.cos(2 * np.pi * (x - y)), sup_norm=1.0)
    g = uniform_grid(0, 1, 129)
    s = nystrom_decompose(k, g, 2)
    assert np.allclose(s.lambdas, 0.5, atol=1e-12)
    proj = s.values.T @ s.values
    x = g.nodes
    ref = 2 * (np.outer(np.cos(2 * np.pi * x), np.cos(2 * np.pi * x)) + np.outer(np.sin(2 * np.pi * x), np.sin(2 * np.pi * x)))
    assert np.abs(proj - ref).max() <= 1e-10


def test_sign_convention_deterministic():
    g = uniform_grid(0, 1, 64)
    a = nystrom_decompose(kernels.exponential(0.3), g, 6)
    b = nystrom_decompose(kernels.exponential(0.3), g, 6)
    assert np.array_equal(a.values, b.values)
    for row in a.values:
        first = row[np.flatnonzero(np.abs(row) > 1e-8)[0]]
        assert first > 0


def test_spectrum_validation():
    g = uniform_grid(0, 1, 3)
    with pytest.raises(ValueError):
        Spectrum(g, [1.0, 2.0], np.ones((2, 3)))
    with pytest.raises(ValueError):
        Spectrum(g, [1.0, 0.0], np.ones((2, 3)))
    with pytest.raises(ValueError):
        Spectrum(g, [1.0], np.ones((1, 4)))
    with pytest.raises(ValueError):
        Spectrum(g, [1.0], np.ones((1, 3)), source="other")


def test_spectrum_truncate_keeps_grid_tail(brownian_nystrom_512):
    s = brownian_nystrom_512
    t = s.truncate(4)
    assert len(t) == 4
    assert t.grid_tail_bound > s.grid_tail_bound
    with pytest.raises(ValueError):
        s.sample(np.array([0.5]))
