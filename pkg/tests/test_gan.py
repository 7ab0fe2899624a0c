import json

import numpy as np
import pytest

from latentwalk import autodiff as ad
from latentwalk.gan import (DATASET_KINDS, MlpParams, MlpSpec, TrainConfig, TrainingDiverged, criticize,
                            default_critic_spec, dumps_checkpoint, generate, generate_node, init_mlp,
                            load_checkpoint, loads_checkpoint, minibatch_stddev_feature, ring_centers,
                            sample_dataset, save_checkpoint, train_wgan)
from latentwalk.metrics import frechet_between
from latentwalk.sphere import sample_prior


def test_init_is_deterministic():
    spec = MlpSpec((3, 5, 2))
    a, b = init_mlp(spec, 7), init_mlp(spec, 7)
    for x, y in zip(a.weights, b.weights):
        assert x.tobytes() == y.tobytes()


def test_weight_shapes_with_stddev_column():
    assert MlpSpec((2, 8, 1)).weight_shapes() == [(8, 2), (1, 8)]
    assert MlpSpec((2, 8, 1), minibatch_stddev=True).weight_shapes() == [(8, 2), (1, 9)]


def test_init_scale_matches_fan_in():
    W = init_mlp(MlpSpec((100, 100)), 0).weights[0]
    assert W.size == 10_000
    assert W.std() == pytest.approx(0.1, rel=0.1)


def _identity_generator(n):
    spec = MlpSpec((n, n))
    return MlpParams(spec, (np.eye(n),), (np.zeros((1, n)),))


def test_identity_generator_is_identity():
    Z = np.random.default_rng(0).standard_normal((5, 3))
    np.testing.assert_array_equal(generate(_identity_generator(3), Z), Z)


def test_generate_rows_are_independent():
    gen = init_mlp(MlpSpec((4, 16, 2)), 1)
    Z = np.random.default_rng(1).standard_normal((6, 4))
    batch = generate(gen, Z)
    rows = np.vstack([generate(gen, z) for z in Z])
    np.testing.assert_allclose(batch, rows, rtol=1e-14, atol=1e-15)


def test_generate_gradient_matches_finite_differences():
    gen = init_mlp(MlpSpec((4, 16, 16, 2)), 2)
    res = ad.check_gradient(lambda z: ad.mean(generate_node(gen, z)),
                            np.random.default_rng(2).standard_normal((5, 4)))
    assert res.max_error < 1e-4


def test_generate_dimension_mismatch():
    with pytest.raises(ad.ShapeError):
        generate(init_mlp(MlpSpec((4, 2)), 0), np.zeros((3, 5)))


def test_stddev_feature_examples():
    assert minibatch_stddev_feature(np.ones((5, 3))) == 0.0
    assert minibatch_stddev_feature([[0.0], [2.0]]) == pytest.approx(1.0, abs=1e-15)
    X = np.random.default_rng(3).standard_normal((7, 4))
    assert minibatch_stddev_feature(X[::-1]) == pytest.approx(minibatch_stddev_feature(X), rel=1e-14)
    with pytest.raises(ad.ShapeError):
        minibatch_stddev_feature(np.ones((1, 3)))


def test_criticize_requires_batch_of_two():
    critic = init_mlp(default_critic_spec(), 0)
    with pytest.raises(ad.ShapeError):
        criticize(critic, np.zeros((1, 2)))


def test_critic_features_row_local():
    critic = init_mlp(default_critic_spec(), 4)
    X = np.random.default_rng(4).standard_normal((6, 2))
    Y = X.copy()
    Y[3] += 1.0
    np.testing.assert_array_equal(criticize(critic, X).features[[0, 1, 2, 4, 5]],
                                  criticize(critic, Y).features[[0, 1, 2, 4, 5]])


def test_ring_points_near_a_mode():
    X, labels = sample_dataset("gaussian-ring", 20_000, 5)
    d = np.linalg.norm(X[:, None, :] - ring_centers()[None], axis=2).min(axis=1)
    assert np.all(d < 4 * 0.05 * np.sqrt(2) * 1.5)
    assert np.mean(d < 4 * 0.05) > 0.99
    counts = np.bincount(labels, minlength=8)
    assert counts.argmax() == 0 and counts[0] > 2 * counts[1:].max()


@pytest.mark.parametrize("kind", DATASET_KINDS)
def test_datasets_deterministic_and_empty(kind):
    a, la = sample_dataset(kind, 100, 9)
    b, lb = sample_dataset(kind, 100, 9)
    assert a.shape == (100, 2)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(la, lb)
    assert sample_dataset(kind, 0, 9)[0].shape == (0, 2)


def test_unknown_dataset_rejected():
    with pytest.raises(ValueError):
        sample_dataset("spiral", 10, 0)


def _short_run(iterations=3, seed=0):
    data, _ = sample_dataset("gaussian-ring", 500, 0)
    gen_spec = MlpSpec((4, 8, 2))
    critic_spec = MlpSpec((2, 8, 1), minibatch_stddev=True)
    return train_wgan(gen_spec, critic_spec, data, TrainConfig(iterations=iterations, batch_size=16, seed=seed))


@pytest.mark.parametrize("iterations", [1, 2, 3])
def test_critic_weights_clipped_after_training(iterations):
    _, critic, history = _short_run(iterations)
    assert len(history.critic_loss) == iterations == len(history.generator_loss)
    for v in critic.as_dict().values():
        assert np.all(np.abs(v) <= TrainConfig().clip)


def test_training_bitwise_reproducible():
    g1, c1, _ = _short_run(5, seed=3)
    g2, c2, _ = _short_run(5, seed=3)
    assert dumps_checkpoint(g1, c1, 3) == dumps_checkpoint(g2, c2, 3)


def test_training_rejects_nonfinite_data():
    with pytest.raises(ValueError):
        train_wgan(MlpSpec((4, 2)), MlpSpec((2, 4, 1), minibatch_stddev=True), np.full((10, 2), np.nan),
                   TrainConfig(iterations=2, batch_size=4))


def test_training_divergence_reports_iteration():
    data, _ = sample_dataset("gaussian-ring", 100, 0)
    with np.errstate(all="ignore"), pytest.raises(TrainingDiverged) as info:
        train_wgan(MlpSpec((4, 2)), MlpSpec((2, 4, 1), minibatch_stddev=True), data,
                   TrainConfig(iterations=5, batch_size=4, lr=1e300))
    assert 0 < info.value.iteration < 5


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(clip=0.0)
    with pytest.raises(ValueError):
        TrainConfig(iterations=0)


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    gen, critic, _ = _short_run(2)
    path = tmp_path / "ck.json"
    save_checkpoint(path, gen, critic, 0)
    g2, c2, seed = load_checkpoint(path)
    Z = sample_prior(8, 4, 0)
    assert generate(gen, Z).tobytes() == generate(g2, Z).tobytes()
    X = generate(gen, Z)
    assert criticize(critic, X).scores.tobytes() == criticize(c2, X).scores.tobytes()
    assert seed == 0
    obj = json.loads(path.read_text())
    assert obj["format_version"] == 1
    assert obj["generator"]["spec"]["widths"] == [4, 8, 2]


def test_checkpoint_errors_name_the_path(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format_version": 99}')
    with pytest.raises(ValueError, match="bad.json"):
        load_checkpoint(path)
    with pytest.raises(ValueError):
        loads_checkpoint("not json")


# trained-model properties


@pytest.mark.slow
def test_trained_generator_close_to_data(toy_gan, ring_real):
    gen, _, _, _ = toy_gan
    X = generate(gen, sample_prior(2048, 16, 7))
    assert frechet_between(X, ring_real) < 0.5


@pytest.mark.slow
def test_trained_critic_prefers_real(toy_gan, ring_real):
    gen, critic, _, _ = toy_gan
    real = criticize(critic, ring_real[:256]).scores.mean()
    fake = criticize(critic, generate(gen, sample_prior(256, 16, 8))).scores.mean()
    assert real > fake


@pytest.mark.slow
def test_trained_critic_scores_centered(toy_gan, ring_real):
    gen, critic, _, _ = toy_gan
    mixed = np.vstack([ring_real[:128], generate(gen, sample_prior(128, 16, 9))])
    assert abs(criticize(critic, mixed).scores.mean()) < 1.0


@pytest.mark.slow
def test_trained_critic_penalizes_identical_batches(toy_gan):
    gen, critic, _, _ = toy_gan
    rng = np.random.default_rng(10)
    X = generate(gen, sample_prior(20, 16, 10))
    lower = []
    for x in X:
        same = np.repeat(x[None], 64, axis=0)
        noisy = same + 0.1 * rng.standard_normal(same.shape)
        lower.append(criticize(critic, same).scores.mean() < criticize(critic, noisy).scores.mean())
    assert all(lower), f"identical batch scored lower in {sum(lower)}/20 cases"
