"""Generator inversion: recover latents whose samples match given targets.

The objective per target is an L1 reconstruction term, an L1 distance
between critic features, and a penalty on the latent norm straying from
sqrt(n). Rows are independent, so a whole batch is optimized at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, adam_step
from .gan import (MlpParams, MlpSpec, critic_features, critic_features_node, generate,
                  generate_node, init_mlp, mlp_forward)
from .sphere import sample_prior


class InversionDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite inversion loss at step {step}")
        self.step = step


@dataclass
class InversionConfig:
    alpha: float = 2.0
    beta: float = 1.0
    lr: float = 0.01
    max_steps: int = 3000
    candidates: int = 1000
    tol: float = 1e-6
    window: int = 50

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.candidates < 1:
            raise ValueError("candidates must be at least 1")


@dataclass
class InversionLosses:
    reconst: np.ndarray
    percep: np.ndarray
    reg: np.ndarray
    total: np.ndarray


@dataclass
class InversionResult:
    z: np.ndarray
    losses: InversionLosses
    init_z: np.ndarray
    init_total: np.ndarray
    steps: np.ndarray
    history: list = field(default_factory=list)


def _batch(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X, dtype=np.float64)
    return (X[None, :], True) if X.ndim == 1 else (X, False)


def _loss_terms(gen, critic, gen_nodes, critic_nodes, target, target_feats, z, alpha, beta):
    """Per-row (reconst, percep, reg, total) nodes, each k x 1."""
    tape = z.tape
    n = z.shape[1]
    out = generate_node(gen, z, gen_nodes)
    reconst = ad.total(ad.absolute(tape.constant(target) - out), axis=1)
    feats = critic_features_node(critic, out, critic_nodes)
    percep = ad.total(ad.absolute(tape.constant(target_feats) - feats), axis=1)
    reg = ad.absolute(ad.row_norm(z) - math.sqrt(n))
    tot = reconst + alpha * percep + beta * reg
    return reconst, percep, reg, tot


def inversion_losses(gen: MlpParams, critic: MlpParams, X, z, alpha: float = 2.0,
                     beta: float = 1.0) -> InversionLosses:
    """Loss terms for each (target, latent) row pair."""
    X, single = _batch(X)
    Z, _ = _batch(z)
    tape = Tape()
    terms = _loss_terms(gen, critic, gen.place(tape), critic.place(tape), X,
                        critic_features(critic, X), tape.constant(Z), alpha, beta)
    vals = [t.value[:, 0].copy() for t in terms]
    if single:
        vals = [v[0] for v in vals]
    return InversionLosses(*vals)


def inversion_objective(gen, critic, X, alpha=2.0, beta=1.0):
    """Scalar objective ``f(z_node)`` (sum of row totals) for gradient checks."""
    X, _ = _batch(X)
    feats = critic_features(critic, X)

    def f(z):
        *_, tot = _loss_terms(gen, critic, gen.place(z.tape), critic.place(z.tape),
                              X, feats, z, alpha, beta)
        return ad.total(tot)
    return f


def init_candidates(gen: MlpParams, critic: MlpParams, X, count: int, seed: int) -> np.ndarray:
    """Pick, per target, the pool draw nearest in critic-feature L2 distance.

    One pool of ``count`` prior draws is shared by all targets; ties go to
    the lowest draw index.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    X, single = _batch(X)
    pool = sample_prior(count, gen.spec.in_dim, seed)
    pool_feats = critic_features(critic, generate(gen, pool))
    target_feats = critic_features(critic, X)
    d2 = ((target_feats[:, None, :] - pool_feats[None, :, :]) ** 2).sum(axis=2)
    best = pool[np.argmin(d2, axis=1)]
    return best[0] if single else best


def invert(gen: MlpParams, critic: MlpParams, X, config: Optional[InversionConfig] = None,
           seed: int = 0, init=None, record_history: bool = False) -> InversionResult:
    """Adam minimization of the inversion objective for each target row.

    A row stops once its total improved by less than ``config.tol`` over the
    last ``config.window`` steps. The best iterate seen for each row is
    returned, so no row ends worse than its initialization.
    """
    config = config or InversionConfig()
    X, single = _batch(X)
    k, n = X.shape[0], gen.spec.in_dim
    Z = init_candidates(gen, critic, X, config.candidates, seed) if init is None else _batch(init)[0].copy()
    if Z.shape != (k, n):
        raise ad.ShapeError(f"initial latents have shape {Z.shape}, expected {(k, n)}")
    feats = critic_features(critic, X)
    init_z = Z.copy()

    init_total = inversion_losses(gen, critic, X, Z, config.alpha, config.beta).total
    best_z, best_total = Z.copy(), init_total.copy()
    active = np.ones(k, dtype=bool)
    steps = np.zeros(k, dtype=int)
    recent: list[np.ndarray] = []
    history = []
    state = AdamState(config.lr)

    for step in range(config.max_steps):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        tape = Tape()
        z = tape.leaf(Z[idx])
        *_, tot = _loss_terms(gen, critic, gen.place(tape), critic.place(tape),
                              X[idx], feats[idx], z, config.alpha, config.beta)
        loss = ad.total(tot)
        if not math.isfinite(loss.item()):
            raise InversionDiverged(step)
        row_tot = np.full(k, np.nan)
        row_tot[idx] = tot.value[:, 0]
        improved = row_tot[idx] < best_total[idx]
        best_total[idx[improved]] = row_tot[idx[improved]]
        best_z[idx[improved]] = Z[idx[improved]]
        if record_history:
            history.append(row_tot)

        recent.append(row_tot)
        if len(recent) > config.window:
            old = recent.pop(0)
            stalled = (old[idx] - row_tot[idx]) < config.tol
            active[idx[stalled]] = False

        grads = tape.backward(loss)
        g = np.zeros_like(Z)
        g[idx] = grads[z]
        new, state = adam_step(state, {"z": Z}, {"z": g})
        Z = np.where(active[:, None], new["z"], Z)
        steps[active] += 1

    # the final iterate was never scored
    last = inversion_losses(gen, critic, X, Z, config.alpha, config.beta).total
    better = last < best_total
    best_z[better] = Z[better]
    losses = inversion_losses(gen, critic, X, best_z, config.alpha, config.beta)
    result = InversionResult(best_z, losses, init_z, init_total, steps, history)
    if single:
        result.z = result.z[0]
    return result


# --- encoder ----------------------------------------------------------------


class EncoderDiverged(RuntimeError):
    pass


def train_encoder(gen: MlpParams, pair_count: int = 50000, seed: int = 0,
                  hidden: tuple = (64, 64), iterations: int = 4000, batch_size: int = 256,
                  lr: float = 1e-3) -> MlpParams:
    """Fit an MLP from samples back to latents on (G(z), z) pairs, L1 loss."""
    if pair_count < 1:
        raise ValueError("pair_count must be at least 1")
    rng = np.random.default_rng(seed)
    n, d = gen.spec.in_dim, gen.spec.out_dim
    Z = rng.standard_normal((pair_count, n))
    X = generate(gen, Z)
    spec = MlpSpec((d, *hidden, n), slope=gen.spec.slope)
    enc = init_mlp(spec, int(rng.integers(2**31)))
    state = AdamState(lr)
    for it in range(iterations):
        rows = rng.integers(0, pair_count, size=min(batch_size, pair_count))
        tape = Tape()
        nodes = enc.place(tape, trainable=True)
        pred, _ = mlp_forward(spec, nodes, tape.constant(X[rows]))
        loss = ad.l1_norm(pred - tape.constant(Z[rows])) / float(len(rows) * n)
        if not math.isfinite(loss.item()):
            raise EncoderDiverged(f"non-finite encoder loss at iteration {it}")
        grads = tape.backward(loss)
        new, state = adam_step(state, enc.as_dict(), {key: grads[node] for key, node in nodes.items()})
        enc = enc.replace(new)
    return enc


def encode(encoder: MlpParams, X) -> np.ndarray:
    X, single = _batch(X)
    tape = Tape()
    out, _ = mlp_forward(encoder.spec, encoder.place(tape), tape.constant(X))
    return out.value[0].copy() if single else out.value.copy()
