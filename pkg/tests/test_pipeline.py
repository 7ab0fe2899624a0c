import json

import numpy as np
import pytest

from latentwalk.gan import MlpSpec, generate, init_mlp
from latentwalk.inversion import InversionConfig
from latentwalk.metrics import frechet_between
from latentwalk.pipeline import (PipelineConfig, PipelineError, compare_methods, enhance_batch, thread_count,
                                 truncation_sweep)
from latentwalk.proto import ProtoConfig
from latentwalk.sigma import SigmaConfig
from latentwalk.sphere import sample_prior

FAST = PipelineConfig(InversionConfig(max_steps=100, candidates=50), ProtoConfig(max_iters=30),
                      SigmaConfig(max_steps=30), batch_size=8)


@pytest.fixture(scope="module")
def small():
    gen = init_mlp(MlpSpec((4, 16, 2)), 0)
    critic = init_mlp(MlpSpec((2, 16, 1), minibatch_stddev=True), 1)
    return gen, critic


def test_enhance_outputs_on_sphere_with_one_sigma_each(small):
    gen, critic = small
    Z0 = sample_prior(20, 4, 0)
    res = enhance_batch(gen, critic, Z0, FAST, seed=1)
    assert np.abs(np.linalg.norm(res.Z_hat, axis=1) - 2.0).max() < 1e-8 * 2.0
    assert len(res.report["per_sample"]) == 20 == len(res.sigma)
    assert set(res.report["per_sample"][0]) == {"sigma", "losses", "cos_sim"}
    assert set(res.report["per_sample"][0]["losses"]) == {"reconst", "percep", "reg", "total"}
    np.testing.assert_array_equal(res.samples, generate(gen, res.Z_hat))
    json.dumps(res.report)


def test_enhance_threads_match_sequential(small):
    gen, critic = small
    Z0 = sample_prior(24, 4, 2)
    a = enhance_batch(gen, critic, Z0, FAST, seed=3, threads=1)
    b = enhance_batch(gen, critic, Z0, FAST, seed=3, threads=3)
    assert a.Z_hat.tobytes() == b.Z_hat.tobytes()
    assert json.dumps(a.report) == json.dumps(b.report)


def test_enhance_reports_stage_of_failure(small):
    gen, critic = small
    with pytest.raises(PipelineError) as info:
        enhance_batch(gen, critic, sample_prior(1, 4, 0), FAST)
    assert info.value.stage == "input"
    Z0 = sample_prior(4, 4, 0)
    Z0[:, :] = Z0[0]
    with pytest.raises(PipelineError) as info:
        enhance_batch(gen, critic, Z0, PipelineConfig(InversionConfig(max_steps=0, candidates=1),
                                                      ProtoConfig(), SigmaConfig(), batch_size=4))
    assert info.value.stage == "proto_search"


def test_enhance_aggregate_with_real(small):
    gen, critic = small
    real = np.random.default_rng(4).standard_normal((100, 2))
    res = enhance_batch(gen, critic, sample_prior(16, 4, 5), FAST, seed=0, real=real)
    agg = res.report["aggregate"]
    assert agg["frechet_raw"] == pytest.approx(frechet_between(res.raw_samples, real), rel=1e-12)
    assert set(agg) == {"frechet_raw", "frechet_enhanced", "frechet_truncation_best"}


def test_thread_count_env(monkeypatch):
    monkeypatch.delenv("LATENTWALK_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("LATENTWALK_THREADS", "4")
    assert thread_count() == 4
    monkeypatch.setenv("LATENTWALK_THREADS", "many")
    with pytest.raises(ValueError):
        thread_count()


def test_loose_truncation_matches_raw(small):
    gen, _ = small
    Z0 = sample_prior(512, 4, 6)
    real = np.random.default_rng(7).standard_normal((512, 2))
    sweep = truncation_sweep(gen, Z0, real, 0, thresholds=(10.0,))
    assert sweep["frechet"] == pytest.approx(frechet_between(generate(gen, Z0), real), rel=1e-12)
    assert sweep["threshold"] == 10.0


def test_compare_methods_schema_and_determinism(small):
    gen, critic = small
    real = np.random.default_rng(8).standard_normal((64, 2))
    a = compare_methods(gen, critic, real, FAST, seed=2, count=16)
    b = compare_methods(gen, critic, real, FAST, seed=2, count=16)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert {"raw", "truncation_best", "constant_sigma_best", "optimized_sigma"} <= set(a)
    assert a["truncation_best"]["threshold"] in [r["threshold"] for r in a["truncation_best"]["sweep"]]
    assert len(a["constant_sigma_best"]["sweep"]) == 11


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(batch_size=1)


# trained toy GAN


@pytest.mark.slow
def test_sigma_varies_across_batch(toy_gan):
    gen, critic, _, _ = toy_gan
    res = enhance_batch(gen, critic, sample_prior(64, 16, 41), PipelineConfig(), seed=0)
    assert res.sigma.std() > 0


@pytest.mark.slow
def test_mean_proto_shortcut_close_to_per_sample(toy_gan, ring_real):
    gen, critic, _, _ = toy_gan
    Z0 = sample_prior(512, 16, 42)
    per = enhance_batch(gen, critic, Z0, PipelineConfig(), seed=0, real=ring_real)
    short = enhance_batch(gen, critic, Z0, PipelineConfig(mean_proto=True), seed=0, real=ring_real)
    f_per = per.report["aggregate"]["frechet_enhanced"]
    f_short = short.report["aggregate"]["frechet_enhanced"]
    print(f"mean-proto / per-sample Frechet ratio {f_short / f_per:.3f}")
    assert abs(f_short - f_per) <= 0.2 * f_per
