"""Per-sample interpolation coefficients toward the protoimage latents.

The objective is the batch mean of squared critic scores of samples
generated at ``proj(sigma_i * zp_i + (1 - sigma_i) * z0_i)``. A drift-centred
critic puts 0 between its real and fake score clusters, which is the
target this objective pulls toward.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, adam_step
from .gan import MlpParams, criticize_node, generate_node
from .sphere import DegenerateDirection, project_to_sphere


@dataclass
class SigmaConfig:
    lr: float = 0.01
    init: float = 0.7
    max_steps: int = 500
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.init <= self.upper <= 1.0:
            raise ValueError("need 0 <= lower <= init <= upper <= 1")
        if self.lr <= 0 or self.max_steps < 0:
            raise ValueError("lr must be positive and max_steps non-negative")


@dataclass
class SigmaResult:
    sigma: np.ndarray
    objective: float
    init_objective: float
    history: list = field(default_factory=list)


def _check(Z0, Zp):
    Z0 = np.asarray(Z0, dtype=np.float64)
    Zp = np.asarray(Zp, dtype=np.float64)
    if Z0.shape != Zp.shape or Z0.ndim != 2:
        raise ad.ShapeError(f"Z0 and Zp must be matching k x n batches, got {Z0.shape} and {Zp.shape}")
    if Z0.shape[0] < 2:
        raise ad.ShapeError("sigma objective needs a batch of at least 2")
    return Z0, Zp


def _objective_node(gen, critic, Z0, Zp, sigma):
    tape = sigma.tape
    n = Z0.shape[1]
    mix = sigma * tape.constant(Zp) + (1.0 - sigma) * tape.constant(Z0)
    norms = ad.row_norm(mix)
    if np.any(norms.value == 0):
        raise DegenerateDirection("interpolant hit the origin")
    z = mix * (math.sqrt(n) / norms)
    scores, _ = criticize_node(critic, generate_node(gen, z))
    return ad.mean(ad.square(scores))


def sigma_objective(gen: MlpParams, critic: MlpParams, Z0, Zp, sigma) -> float:
    Z0, Zp = _check(Z0, Zp)
    s = np.broadcast_to(np.asarray(sigma, dtype=np.float64).reshape(-1, 1), (Z0.shape[0], 1))
    if np.any((s < 0) | (s > 1)):
        raise ValueError("sigma must lie in [0, 1]")
    tape = Tape()
    return _objective_node(gen, critic, Z0, Zp, tape.constant(s)).item()


def sigma_objective_fn(gen, critic, Z0, Zp):
    """Scalar ``f(sigma_node)`` for gradient checks; sigma is k x 1."""
    Z0, Zp = _check(Z0, Zp)
    return lambda s: _objective_node(gen, critic, Z0, Zp, s)


def optimize_sigma(gen: MlpParams, critic: MlpParams, Z0, Zp,
                   config: Optional[SigmaConfig] = None) -> SigmaResult:
    """Adam on sigma, clamped to the bounds after every step.

    Returns the best iterate seen, never one scoring worse than the start.
    """
    config = config or SigmaConfig()
    Z0, Zp = _check(Z0, Zp)
    k = Z0.shape[0]
    sigma = np.full((k, 1), config.init)
    state = AdamState(config.lr)
    best_sigma, best = sigma.copy(), math.inf
    history = []
    init_obj = None
    for step in range(config.max_steps + 1):
        tape = Tape()
        s = tape.leaf(sigma)
        obj = _objective_node(gen, critic, Z0, Zp, s)
        value = obj.item()
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite sigma objective at step {step}")
        if init_obj is None:
            init_obj = value
        history.append(value)
        if value < best:
            best, best_sigma = value, sigma.copy()
        if step == config.max_steps:
            break
        g = tape.backward(obj)[s]
        new, state = adam_step(state, {"s": sigma}, {"s": g})
        sigma = np.clip(new["s"], config.lower, config.upper)
    return SigmaResult(best_sigma[:, 0], best, init_obj, history)


def grid_oracle_sigma(gen: MlpParams, critic: MlpParams, Z0, Zp, resolution: int,
                      passes: int = 3, init=None, exhaustive_limit: int = 1024) -> np.ndarray:
    """Grid-restricted minimizer of the sigma objective.

    Small problems (at most ``exhaustive_limit`` grid combinations) are
    enumerated. Otherwise coordinate descent sweeps one coefficient at a time
    for ``passes`` rounds, started from every constant grid vector and from
    ``init`` if given; the best result over all starts wins.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    Z0, Zp = _check(Z0, Zp)
    k = Z0.shape[0]
    grid = np.linspace(0.0, 1.0, resolution)

    def f(s):
        return sigma_objective(gen, critic, Z0, Zp, s)

    if resolution ** k <= exhaustive_limit:
        best_s, best = None, math.inf
        for combo in itertools.product(grid, repeat=k):
            value = f(np.array(combo))
            if value < best:
                best, best_s = value, np.array(combo)
        return best_s

    starts = [np.full(k, g) for g in grid]
    if init is not None:
        starts.append(np.asarray(init, dtype=np.float64).copy())
    best_s, best = None, math.inf
    for s in starts:
        s = s.copy()
        current = f(s)
        for _ in range(passes):
            for i in range(k):
                for g in grid:
                    if g == s[i]:
                        continue
                    old = s[i]
                    s[i] = g
                    value = f(s)
                    if value < current:
                        current = value
                    else:
                        s[i] = old
        if current < best:
            best, best_s = current, s.copy()
    return best_s


def mean_proto_shortcut(protos) -> np.ndarray:
    """Projected row mean of a set of protoimage latents."""
    P = np.atleast_2d(np.asarray(protos, dtype=np.float64))
    if P.shape[0] == 0:
        raise ValueError("proto set is empty")
    m = P.mean(axis=0)
    if not np.any(m):
        raise DegenerateDirection("proto latents average to the zero vector")
    return project_to_sphere(m)
