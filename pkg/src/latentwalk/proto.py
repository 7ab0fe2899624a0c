"""Protoimage search along great circles, and naive-walk traces.

Both walks start at the recovered latent ``z1`` and move inside the plane
spanned by ``z0`` and ``z1``, so every iterate stays on the great circle
through them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, adam_step
from .gan import MlpParams, criticize, criticize_node, generate, generate_node
from .sphere import DegenerateDirection, project_to_sphere


@dataclass
class ProtoConfig:
    lam: float = 3.0
    gamma: float = 0.0
    delta: float = 0.0
    lr: float = 0.1
    epsilon: float = 1e-3
    max_iters: int = 500
    q_init: str = "unit"

    def __post_init__(self):
        if self.lr <= 0 or self.epsilon <= 0:
            raise ValueError("lr and epsilon must be positive")
        if min(self.lam, self.gamma, self.delta) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.q_init not in ("unit", "difference"):
            raise ValueError(f"unknown q_init policy {self.q_init!r}")


def _proto_loss_node(gen, critic, zp, z0, config, gen_nodes=None, critic_nodes=None):
    scores, _ = criticize_node(critic, generate_node(gen, zp, gen_nodes), critic_nodes)
    cos = ad.cosine_similarity(zp, z0)
    loss = ad.mean(scores) + config.lam * ad.mean(cos)
    if config.gamma > 0:
        loss = loss + config.gamma * ad.std(scores)
    if config.delta > 0:
        loss = loss + config.delta * ad.std(cos)
    return loss


def proto_loss(critic: MlpParams, gen: MlpParams, Zp, Z0, config: Optional[ProtoConfig] = None) -> float:
    """Batch-mean critic score plus weighted cosine (and optional std) terms."""
    config = config or ProtoConfig()
    Zp = np.atleast_2d(np.asarray(Zp, dtype=np.float64))
    Z0 = np.atleast_2d(np.asarray(Z0, dtype=np.float64))
    if Zp.shape[0] < 2:
        raise ad.ShapeError("proto loss needs a batch of at least 2")
    tape = Tape()
    return _proto_loss_node(gen, critic, tape.constant(Zp), tape.constant(Z0), config).item()


def proto_objective(critic, gen, Z0, config=None):
    """Scalar ``f(zp_node)`` for gradient checks."""
    config = config or ProtoConfig()
    Z0 = np.asarray(Z0, dtype=np.float64)

    def f(zp):
        return _proto_loss_node(gen, critic, zp, zp.tape.constant(Z0), config)
    return f


@dataclass
class TraversalTrace:
    iteration: np.ndarray
    critic_score: np.ndarray
    cos_sim_z0: np.ndarray
    step_norm: np.ndarray
    latents: Optional[np.ndarray] = None
    truncated: bool = False

    def __len__(self):
        return len(self.iteration)

    def rows(self):
        for i in range(len(self)):
            row = [int(self.iteration[i]), self.critic_score[i], self.cos_sim_z0[i], self.step_norm[i]]
            if self.latents is not None:
                row.extend(self.latents[i])
            yield row

    def header(self) -> list[str]:
        cols = ["step", "critic_score", "cos_sim_z0", "step_norm"]
        if self.latents is not None:
            cols += [f"z_{j}" for j in range(self.latents.shape[1])]
        return cols


@dataclass
class BatchTrace:
    """Per-step, per-sample records; arrays are ``steps x k``."""

    iteration: np.ndarray
    critic_score: np.ndarray
    cos_sim_z0: np.ndarray
    step_norm: np.ndarray
    latents: Optional[np.ndarray] = None
    truncated: bool = False

    def sample(self, i: int) -> TraversalTrace:
        lat = None if self.latents is None else self.latents[:, i, :]
        return TraversalTrace(self.iteration.copy(), self.critic_score[:, i].copy(),
                              self.cos_sim_z0[:, i].copy(), self.step_norm[:, i].copy(),
                              lat, self.truncated)

    def mean_score(self) -> np.ndarray:
        return self.critic_score.mean(axis=1)


@dataclass
class ProtoResult:
    Zp: np.ndarray
    trace: BatchTrace
    iterations: int
    converged: np.ndarray
    no_direction: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _critic_scores(gen, critic, Z):
    return criticize(critic, generate(gen, Z)).scores


def _cosine_rows(A, B):
    return (A * B).sum(axis=1) / (np.linalg.norm(A, axis=1) * np.linalg.norm(B, axis=1))


def find_proto(gen: MlpParams, critic: MlpParams, Z0, Z1, config: Optional[ProtoConfig] = None,
               keep_latents: bool = False) -> ProtoResult:
    """Walk each row from ``Z1`` (projected) along its great circle, learning the step size.

    Each iteration moves ``z`` by ``(q . zbar) zbar / |zbar|``, projects back
    to the sphere, scores the batch and takes one Adam step on ``q``. A row
    freezes once its last step is no longer than ``config.epsilon``; frozen
    rows still take part in the batch statistics. Rows with ``z0 == z1`` have
    no direction: they are left out of the batch and returned projected.
    """
    config = config or ProtoConfig()
    Z0 = np.asarray(Z0, dtype=np.float64)
    Z1 = np.asarray(Z1, dtype=np.float64)
    if Z0.shape != Z1.shape or Z0.ndim != 2:
        raise ad.ShapeError(f"Z0 and Z1 must be matching k x n batches, got {Z0.shape} and {Z1.shape}")
    k_all, n = Z0.shape
    zbar_all = Z1 - Z0
    has_dir = np.linalg.norm(zbar_all, axis=1) > 0
    keep = np.flatnonzero(has_dir)
    if keep.size < 2:
        raise ad.ShapeError("proto search needs at least 2 rows with a nonzero direction")
    z0 = Z0[keep]
    prev, curr = z0.copy(), project_to_sphere(Z1[keep])
    zbar = curr - prev
    k = len(keep)
    norms = np.linalg.norm(zbar, axis=1, keepdims=True)
    q = zbar / norms if config.q_init == "unit" else zbar.copy()
    active = norms[:, 0] > config.epsilon
    state = AdamState(config.lr)
    radius = math.sqrt(n)

    def record(z, steps):
        scores.append(_critic_scores(gen, critic, z))
        cosines.append(_cosine_rows(z, z0))
        step_norms.append(steps)
        if keep_latents:
            lat.append(z.copy())

    scores, cosines, step_norms, lat = [], [], [], []
    record(curr, norms[:, 0])
    it = 0
    while it < config.max_iters and active.any():
        tape = Tape()
        q_node = tape.leaf(q)
        unit = zbar / np.maximum(np.linalg.norm(zbar, axis=1, keepdims=True), np.finfo(float).tiny)
        mask = active[:, None].astype(np.float64)
        s = ad.total(q_node * tape.constant(zbar), axis=1) * tape.constant(mask)
        moved = tape.constant(curr) + s * tape.constant(unit)
        z_new = moved * (radius / ad.row_norm(moved))
        loss = _proto_loss_node(gen, critic, z_new, tape.constant(z0), config)
        if not math.isfinite(loss.item()):
            raise FloatingPointError(f"non-finite proto loss at iteration {it}")
        g = tape.backward(loss)[q_node]
        new_q, state = adam_step(state, {"q": q}, {"q": g})
        q = np.where(active[:, None], new_q["q"], q)

        nxt = np.where(active[:, None], z_new.value, curr)
        step = np.linalg.norm(nxt - curr, axis=1)
        prev, curr = curr, nxt
        zbar = np.where(active[:, None], curr - prev, zbar)
        it += 1
        record(curr, np.where(active, step, 0.0))
        active &= step > config.epsilon

    Zp = np.array(Z1, copy=True)
    Zp[keep] = curr
    Zp = project_to_sphere(Zp)
    trace = BatchTrace(np.arange(it + 1), np.array(scores), np.array(cosines), np.array(step_norms),
                       np.array(lat) if keep_latents else None)
    return ProtoResult(Zp, trace, it, ~active, np.flatnonzero(~has_dir))


def walk_trace(gen: MlpParams, critic: MlpParams, Z0, Z1, steps: int,
               keep_latents: bool = True) -> BatchTrace:
    """Naive great-circle walk z_{k+1} = proj(2 z_k - z_{k-1}) from z1.

    The walk starts from ``z1`` projected onto the sphere; that start is step
    0, with step norm ``|start - z0|``. Scores are
    taken over the whole batch at each step. A degenerate step ends the
    trace early with ``truncated`` set.
    """
    Z0 = np.atleast_2d(np.asarray(Z0, dtype=np.float64))
    Z1 = np.atleast_2d(np.asarray(Z1, dtype=np.float64))
    if np.any(np.linalg.norm(Z1 - Z0, axis=1) == 0):
        raise DegenerateDirection("z0 and z1 coincide; the walk has no direction")
    start = project_to_sphere(Z1)
    path = [start]
    norms = [np.linalg.norm(start - Z0, axis=1)]
    prev = Z0
    truncated = False
    for _ in range(steps):
        try:
            nxt = project_to_sphere(2.0 * path[-1] - prev)
        except DegenerateDirection:
            truncated = True
            break
        prev = path[-1]
        path.append(nxt)
        norms.append(np.linalg.norm(nxt - prev, axis=1))
    scores = np.array([_critic_scores(gen, critic, z) for z in path])
    cos = np.array([_cosine_rows(z, Z0) for z in path])
    return BatchTrace(np.arange(len(path)), scores, cos, np.array(norms),
                      np.array(path) if keep_latents else None, truncated)
