"""Built-in invariant suite run by ``latentwalk check``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .autodiff import check_gradient
from .gan import MlpSpec, init_mlp, load_checkpoint
from .inversion import inversion_objective
from .metrics import GaussianSummary, frechet_distance, frechet_distance_2x2
from .proto import ProtoConfig, proto_objective
from .sigma import sigma_objective_fn
from .sphere import naive_walk, norm_concentration_stat, project_to_sphere, sample_prior, span_residual


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


def _small_models(seed: int = 0):
    gen = init_mlp(MlpSpec((4, 8, 2)), seed)
    critic = init_mlp(MlpSpec((2, 8, 1), minibatch_stddev=True), seed + 1)
    return gen, critic


def check_gradients(points: int = 20, seed: int = 0) -> CheckResult:
    gen, critic = _small_models(seed)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        Z0 = project_to_sphere(rng.standard_normal((4, 4)))
        X = rng.standard_normal((4, 2))
        Zp = project_to_sphere(rng.standard_normal((4, 4)))
        cfg = ProtoConfig(gamma=1.0, delta=3.0)
        for f, x in ((inversion_objective(gen, critic, X), rng.standard_normal((4, 4))),
                     (proto_objective(critic, gen, Z0, cfg), Zp),
                     (sigma_objective_fn(gen, critic, Z0, Zp), rng.uniform(0.05, 0.95, (4, 1)))):
            worst = max(worst, check_gradient(f, x).max_error)
    return CheckResult("gradients", worst < 1e-4, f"max relative error {worst:.2e} (bound 1e-4)")


def check_sphere(iterates: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    n = 16
    radius = math.sqrt(n)
    z0 = project_to_sphere(rng.standard_normal(n))
    z1 = project_to_sphere(z0 + 0.3 * rng.standard_normal(n))
    path = naive_walk(z0, z1, iterates)
    norm_err = np.abs(np.linalg.norm(path, axis=1) - radius).max() / radius
    resid = span_residual(path, z0, z1).max()
    ok = norm_err < 1e-8 and resid < 1e-6 * radius
    return CheckResult("sphere", ok, f"{len(path)} iterates, norm error {norm_err:.1e}, span residual {resid:.1e}")


def check_soap_bubble(seed: int = 0) -> CheckResult:
    n = 512
    mean, sd = norm_concentration_stat(n, 100_000, seed)
    target = math.sqrt(n - 0.5)
    ok = abs(mean - target) <= 0.005 * target and 0.6 <= sd <= 0.8
    return CheckResult("soap_bubble",
                       ok, f"mean norm {mean:.4f} (bound {target:.4f} +/- 0.5%), std {sd:.4f} (bound [0.6, 0.8])")


def check_frechet_2x2(pairs: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(pairs):
        A, B = rng.standard_normal((2, 2, 2))
        g1 = GaussianSummary(rng.standard_normal(2), A @ A.T)
        g2 = GaussianSummary(rng.standard_normal(2), B @ B.T)
        worst = max(worst, abs(frechet_distance(g1, g2) - frechet_distance_2x2(g1, g2)))
    return CheckResult("frechet_2x2", worst < 1e-8, f"max disagreement {worst:.1e} over {pairs} pairs (bound 1e-8)")


def check_checkpoint(path) -> CheckResult:
    try:
        load_checkpoint(path)
    except (OSError, ValueError) as exc:
        return CheckResult("checkpoint", False, str(exc))
    return CheckResult("checkpoint", True, f"{path} loads")


def run_checks(checkpoint=None, report: Optional[Callable[[CheckResult], None]] = None) -> list[CheckResult]:
    suite = [check_gradients, check_sphere, check_soap_bubble, check_frechet_2x2]
    if checkpoint is not None:
        suite.append(lambda: check_checkpoint(checkpoint))
    results = []
    for check in suite:
        res = check()
        results.append(res)
        if report is not None:
            report(res)
    return results
