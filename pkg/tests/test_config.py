import pytest

from latentwalk.config import ConfigError, load_config, parse_config
from latentwalk.gan import TrainConfig


def test_defaults():
    cfg = parse_config({"dataset": {"kind": "gaussian-ring"}})
    assert (cfg.inversion.lr, cfg.inversion.alpha, cfg.inversion.beta) == (0.01, 2.0, 1.0)
    assert (cfg.proto.lr, cfg.proto.lam) == (0.1, 3.0)
    assert (cfg.sigma.lr, cfg.sigma.init) == (0.01, 0.7)
    assert cfg.train == TrainConfig()
    assert cfg.pipeline().batch_size == 64
    assert cfg.model.generator_spec().widths == (16, 64, 64, 2)


def test_missing_kind_names_field():
    for data in ({}, {"dataset": {"count": 10}}):
        with pytest.raises(ConfigError) as info:
            parse_config(data)
        assert info.value.field == "dataset.kind"


def test_unknown_kind():
    with pytest.raises(ConfigError, match="spiral"):
        parse_config({"dataset": {"kind": "spiral"}})


@pytest.mark.parametrize("data, field", [
    ({"dataset": {"kind": "two-moons"}, "train": {"clipp": 0.1}}, "train.clipp"),
    ({"dataset": {"kind": "two-moons"}, "extra": {}}, "extra"),
    ({"dataset": {"kind": "two-moons"}, "pipeline": {"threads": 2}}, "pipeline.threads"),
    ({"dataset": {"kind": "two-moons"}, "pipeline": {"mean_proto": 1}}, "pipeline.mean_proto"),
    ({"dataset": {"kind": "two-moons"}, "seed": -1}, "seed"),
    ({"dataset": {"kind": "two-moons"}, "sigma": {"init": 2.0}}, "sigma"),
])
def test_bad_fields_are_named(data, field):
    with pytest.raises(ConfigError) as info:
        parse_config(data)
    assert info.value.field == field


def test_types_coerced(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('seed = 3\n[dataset]\nkind = "labeled-modes"\n[model]\nhidden = [8, 8]\n'
                    '[train]\nlr = 1\n[pipeline]\nbatch_size = 8\nmean_proto = true\n')
    cfg = load_config(path)
    assert cfg.model.hidden == (8, 8)
    assert cfg.train.lr == 1.0 and isinstance(cfg.train.lr, float)
    assert cfg.pipeline().mean_proto and cfg.pipeline().batch_size == 8
    assert cfg.seed == 3
    assert cfg.to_dict()["dataset"]["kind"] == "labeled-modes"


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[dataset\n")
    with pytest.raises(ConfigError) as info:
        load_config(bad)
    assert info.value.field == "config"


def test_pipeline_batch_size_validated():
    with pytest.raises(ConfigError) as info:
        parse_config({"dataset": {"kind": "two-moons"}, "pipeline": {"batch_size": 1}})
    assert info.value.field == "pipeline"


def test_shipped_config_matches_defaults():
    from pathlib import Path

    cfg = load_config(Path(__file__).parents[1] / "configs" / "ring.toml")
    assert cfg.train == TrainConfig()
    assert cfg.pipeline() == parse_config({"dataset": {"kind": "gaussian-ring"}}).pipeline()
