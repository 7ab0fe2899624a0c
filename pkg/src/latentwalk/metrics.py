"""Gaussian Frechet distance between sample sets, computed in data space."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianSummary:
    mu: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mu.shape[0]


def fit_gaussian(samples) -> GaussianSummary:
    """Sample mean and unbiased covariance of a ``count x d`` matrix."""
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fit_gaussian needs at least 2 samples")
    mu = X.mean(axis=0)
    centered = X - mu
    cov = centered.T @ centered / (X.shape[0] - 1)
    return GaussianSummary(mu, 0.5 * (cov + cov.T))


def jacobi_eigh(S, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns,
    so that ``S = V @ diag(w) @ V.T``.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) Givens rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def matrix_sqrt_psd(S, sym_tol: float = 1e-10, neg_tol: float = 1e-10) -> np.ndarray:
    """Symmetric PSD square root; eigenvalues in [-neg_tol, 0) clamp to 0."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, np.abs(S).max())
    if np.abs(S - S.T).max() > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, V = jacobi_eigh(0.5 * (S + S.T))
    if np.any(w < -neg_tol * scale):
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3g})")
    root = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def _trace_sqrt_product(c1, c2) -> float:
    """Tr((c1 c2)^{1/2}) via the symmetric form (c1^{1/2} c2 c1^{1/2})^{1/2}."""
    r1 = matrix_sqrt_psd(c1)
    inner = r1 @ c2 @ r1
    inner = 0.5 * (inner + inner.T)
    w, _ = jacobi_eigh(inner)
    return float(np.sqrt(np.clip(w, 0.0, None)).sum())


def frechet_distance(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """Squared Frechet distance between two Gaussians."""
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    diff = g1.mu - g2.mu
    tr = np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * _trace_sqrt_product(g1.cov, g2.cov)
    return float(diff @ diff + tr)


def frechet_distance_2x2(g1: GaussianSummary, g2: GaussianSummary) -> float:
    """Closed form for d = 2: Tr(sqrt(M)) = sqrt(Tr M + 2 sqrt(det M))."""
    if g1.dim != 2 or g2.dim != 2:
        raise ValueError("closed form only applies to 2-D summaries")
    M = g1.cov @ g2.cov
    det = max(np.linalg.det(M), 0.0)
    tr_sqrt = math.sqrt(max(np.trace(M) + 2.0 * math.sqrt(det), 0.0))
    diff = g1.mu - g2.mu
    return float(diff @ diff + np.trace(g1.cov) + np.trace(g2.cov) - 2.0 * tr_sqrt)


def frechet_between(samples_a, samples_b) -> float:
    return frechet_distance(fit_gaussian(samples_a), fit_gaussian(samples_b))
