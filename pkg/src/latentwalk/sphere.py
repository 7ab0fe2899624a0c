"""Geometry on the sqrt(n)-radius latent hypersphere."""
from __future__ import annotations

import math

import numpy as np


class DegenerateDirection(ValueError):
    pass


def _rows(z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        return z[None, :], True
    return z, False


def project_to_sphere(z) -> np.ndarray:
    """Rescale each row to norm sqrt(n). Accepts a vector or a k x n batch."""
    Z, single = _rows(z)
    n = Z.shape[1]
    norms = np.linalg.norm(Z, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateDirection("cannot project the zero vector onto the sphere")
    out = Z * (np.sqrt(n) / norms)
    return out[0] if single else out


def on_sphere(z, rtol: float = 1e-9) -> bool:
    Z, _ = _rows(z)
    radius = np.sqrt(Z.shape[1])
    return bool(np.all(np.abs(np.linalg.norm(Z, axis=1) - radius) <= rtol * radius))


def sample_prior(k: int, n: int, seed: int) -> np.ndarray:
    """k x n i.i.d. standard normal latents."""
    if k <= 0 or n <= 0:
        raise ValueError("k and n must be positive")
    return np.random.default_rng(seed).standard_normal((k, n))


def norm_concentration_stat(n: int, count: int, seed: int, chunk: int = 10000) -> tuple[float, float]:
    """Empirical mean and std of prior latent norms."""
    if count < 1000:
        raise ValueError("count must be at least 1000")
    rng = np.random.default_rng(seed)
    norms = []
    left = count
    while left > 0:
        m = min(chunk, left)
        norms.append(np.linalg.norm(rng.standard_normal((m, n)), axis=1))
        left -= m
    norms = np.concatenate(norms)
    return float(norms.mean()), float(norms.std())


def chi_mean(n: int) -> float:
    """Exact E||z|| for z ~ N(0, I_n)."""
    return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2) - math.lgamma(n / 2))


def naive_walk_step(z_prev, z_curr) -> np.ndarray:
    """proj(z_curr + (z_curr - z_prev)); rows are walked independently."""
    z_prev = np.asarray(z_prev, dtype=np.float64)
    z_curr = np.asarray(z_curr, dtype=np.float64)
    return project_to_sphere(2.0 * z_curr - z_prev)


def naive_walk(z0, z1, steps: int) -> np.ndarray:
    """Iterates ``[z1, z2, ..., z_{steps+1}]`` of the naive walk."""
    path = [np.asarray(z1, dtype=np.float64)]
    prev = np.asarray(z0, dtype=np.float64)
    for _ in range(steps):
        nxt = naive_walk_step(prev, path[-1])
        prev = path[-1]
        path.append(nxt)
    return np.stack(path)


def sphere_interpolate(z0, zp, sigma) -> np.ndarray:
    """proj(sigma * zp + (1 - sigma) * z0), row-wise for batches.

    ``sigma`` may be a scalar or one value per row.
    """
    Z0, single = _rows(z0)
    ZP, _ = _rows(zp)
    if Z0.shape != ZP.shape:
        raise ValueError(f"shape mismatch {Z0.shape} vs {ZP.shape}")
    s = np.asarray(sigma, dtype=np.float64).reshape(-1, 1)
    if np.any((s < 0) | (s > 1)):
        raise ValueError("sigma must lie in [0, 1]")
    mix = s * ZP + (1.0 - s) * Z0
    try:
        out = project_to_sphere(mix)
    except DegenerateDirection:
        raise DegenerateDirection("antipodal endpoints give an ambiguous interpolation") from None
    return out[0] if single else out


def truncation_resample(Z, threshold: float, seed: int) -> np.ndarray:
    """Redraw every entry with |value| > threshold until it falls inside."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    rng = np.random.default_rng(seed)
    out = np.array(Z, dtype=np.float64, copy=True)
    bad = np.abs(out) > threshold
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > threshold
    return out


def attribute_direction(Z_with, Z_without) -> np.ndarray:
    """Difference of the set means, mean(Z_with) - mean(Z_without)."""
    A = np.asarray(Z_with, dtype=np.float64)
    B = np.asarray(Z_without, dtype=np.float64)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("both latent sets must be nonempty")
    return A.mean(axis=0) - B.mean(axis=0)


def span_residual(points, a, b) -> np.ndarray:
    """Distance of each row of ``points`` from span(a, b)."""
    basis, _ = np.linalg.qr(np.stack([a, b], axis=1))
    P = np.atleast_2d(points)
    return np.linalg.norm(P - (P @ basis) @ basis.T, axis=1)
