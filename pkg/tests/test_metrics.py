import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latentwalk.metrics import (GaussianSummary, fit_gaussian, frechet_distance, frechet_distance_2x2,
                                jacobi_eigh, matrix_sqrt_psd)


def _random_psd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + 1e-3 * np.eye(d)


def test_fit_gaussian_two_points():
    g = fit_gaussian([[0.0, 0.0], [2.0, 0.0]])
    np.testing.assert_array_equal(g.mu, [1.0, 0.0])
    np.testing.assert_array_equal(g.cov, [[2.0, 0.0], [0.0, 0.0]])


def test_fit_gaussian_deterministic():
    X = np.random.default_rng(0).standard_normal((50, 3))
    a, b = fit_gaussian(X), fit_gaussian(X.copy())
    assert a.mu.tobytes() == b.mu.tobytes() and a.cov.tobytes() == b.cov.tobytes()


def test_fit_gaussian_standard_normal_cov_near_identity():
    g = fit_gaussian(np.random.default_rng(1).standard_normal((10_000, 3)))
    np.testing.assert_allclose(g.cov, np.eye(3), atol=0.05)


def test_fit_gaussian_needs_two_samples():
    with pytest.raises(ValueError):
        fit_gaussian(np.zeros((1, 2)))


@pytest.mark.parametrize("d", range(2, 9))
def test_jacobi_matches_numpy(d):
    S = _random_psd(np.random.default_rng(d), d)
    w, V = jacobi_eigh(S)
    np.testing.assert_allclose(np.sort(w), np.linalg.eigvalsh(S), rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(V @ np.diag(w) @ V.T, S, atol=1e-10)
    np.testing.assert_allclose(V.T @ V, np.eye(d), atol=1e-12)


def test_sqrt_identity_and_diagonal():
    np.testing.assert_allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-15)


@pytest.mark.parametrize("d", range(2, 9))
def test_sqrt_reconstructs(d):
    rng = np.random.default_rng(100 + d)
    for _ in range(10):
        S = _random_psd(rng, d)
        R = matrix_sqrt_psd(S)
        assert np.linalg.norm(R @ R - S) < 1e-8
        assert np.linalg.eigvalsh(R).min() >= -1e-12


def test_sqrt_clamps_tiny_negative_eigenvalues():
    S = np.diag([1.0, -1e-12])
    np.testing.assert_allclose(matrix_sqrt_psd(S), np.diag([1.0, 0.0]))


def test_sqrt_rejects_asymmetric():
    with pytest.raises(ValueError):
        matrix_sqrt_psd(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_frechet_identical_is_zero():
    rng = np.random.default_rng(2)
    g = GaussianSummary(rng.standard_normal(4), _random_psd(rng, 4))
    assert abs(frechet_distance(g, g)) < 1e-10


def test_frechet_mean_shift():
    g1 = GaussianSummary(np.zeros(2), np.eye(2))
    g2 = GaussianSummary(np.array([1.0, 0.0]), np.eye(2))
    assert frechet_distance(g1, g2) == pytest.approx(1.0, abs=1e-10)


def test_frechet_scaled_cov():
    g1 = GaussianSummary(np.zeros(2), np.eye(2))
    g2 = GaussianSummary(np.zeros(2), 4 * np.eye(2))
    assert frechet_distance(g1, g2) == pytest.approx(2.0, abs=1e-10)


def test_frechet_dimension_mismatch():
    with pytest.raises(ValueError):
        frechet_distance(GaussianSummary(np.zeros(2), np.eye(2)), GaussianSummary(np.zeros(3), np.eye(3)))


def test_closed_form_2x2_agrees_with_eigen_path():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        g1 = GaussianSummary(rng.standard_normal(2), _random_psd(rng, 2))
        g2 = GaussianSummary(rng.standard_normal(2), _random_psd(rng, 2))
        worst = max(worst, abs(frechet_distance(g1, g2) - frechet_distance_2x2(g1, g2)))
    assert worst < 1e-8


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_frechet_symmetric_and_rotation_invariant(seed, d):
    rng = np.random.default_rng(seed)
    g1 = GaussianSummary(rng.standard_normal(d), _random_psd(rng, d))
    g2 = GaussianSummary(rng.standard_normal(d), _random_psd(rng, d))
    f12 = frechet_distance(g1, g2)
    assert f12 == pytest.approx(frechet_distance(g2, g1), abs=1e-8)
    assert f12 >= -1e-10
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    r1 = GaussianSummary(Q @ g1.mu, Q @ g1.cov @ Q.T)
    r2 = GaussianSummary(Q @ g2.mu, Q @ g2.cov @ Q.T)
    assert frechet_distance(r1, r2) == pytest.approx(f12, abs=1e-8)
