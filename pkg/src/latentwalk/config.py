"""Run configuration loaded from a TOML file.

Every section is optional except ``[dataset]`` with its ``kind`` key.
Unknown sections or keys are rejected so that typos do not silently fall
back to defaults.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .gan import DATASET_KINDS, MlpSpec, TrainConfig
from .inversion import InversionConfig
from .pipeline import PipelineConfig
from .proto import ProtoConfig
from .sigma import SigmaConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class DatasetConfig:
    kind: str
    count: int = 50000
    seed: int = 0
    real_count: int = 2048
    real_seed: int = 12345


@dataclass
class ModelConfig:
    latent_dim: int = 16
    hidden: tuple = (64, 64)
    slope: float = 0.2

    def generator_spec(self, data_dim: int = 2) -> MlpSpec:
        return MlpSpec((self.latent_dim, *self.hidden, data_dim), slope=self.slope)

    def critic_spec(self, data_dim: int = 2) -> MlpSpec:
        return MlpSpec((data_dim, *self.hidden, 1), slope=self.slope, minibatch_stddev=True)


@dataclass
class EvalConfig:
    count: int = 2048
    seed: int = 0


@dataclass
class RunConfig:
    dataset: DatasetConfig
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    proto: ProtoConfig = field(default_factory=ProtoConfig)
    sigma: SigmaConfig = field(default_factory=SigmaConfig)
    pipeline_batch_size: int = 64
    mean_proto: bool = False
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(self.inversion, self.proto, self.sigma, self.pipeline_batch_size, self.mean_proto)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "dataset": DatasetConfig,
    "model": ModelConfig,
    "train": TrainConfig,
    "inversion": InversionConfig,
    "proto": ProtoConfig,
    "sigma": SigmaConfig,
    "eval": EvalConfig,
}
_PIPELINE_KEYS = {"batch_size": "pipeline_batch_size", "mean_proto": "mean_proto"}


def _build(name: str, cls, table) -> object:
    if not isinstance(table, dict):
        raise ConfigError(name, "expected a table")
    known = {f.name: f for f in fields(cls)}
    for key in table:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    values = {}
    for key, value in table.items():
        default = known[key].default
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"{name}.{key}", f"expected a boolean, got {value!r}")
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if isinstance(default, tuple) and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    try:
        return cls(**values)
    except TypeError as exc:
        missing = [f.name for f in fields(cls) if f.name not in values]
        raise ConfigError(f"{name}.{missing[0]}" if missing else name, str(exc)) from None
    except ValueError as exc:
        raise ConfigError(name, str(exc)) from None


def parse_config(data: dict) -> RunConfig:
    if "dataset" not in data or "kind" not in data.get("dataset", {}):
        raise ConfigError("dataset.kind", "required")
    kind = data["dataset"]["kind"]
    if kind not in DATASET_KINDS:
        raise ConfigError("dataset.kind", f"unknown dataset {kind!r}; expected one of {', '.join(DATASET_KINDS)}")
    sections = {}
    extra = {}
    for key, value in data.items():
        if key in _SECTIONS:
            sections[key] = _build(key, _SECTIONS[key], value)
        elif key == "pipeline":
            if not isinstance(value, dict):
                raise ConfigError("pipeline", "expected a table")
            for sub, v in value.items():
                if sub not in _PIPELINE_KEYS:
                    raise ConfigError(f"pipeline.{sub}", "unknown key")
                want = bool if sub == "mean_proto" else int
                if not isinstance(v, want) or (want is int and isinstance(v, bool)):
                    raise ConfigError(f"pipeline.{sub}", f"expected {want.__name__}, got {v!r}")
                extra[_PIPELINE_KEYS[sub]] = v
        elif key == "seed":
            if not isinstance(value, int) or value < 0:
                raise ConfigError("seed", "expected a non-negative integer")
            extra["seed"] = value
        else:
            raise ConfigError(key, "unknown section")
    cfg = RunConfig(**sections, **extra)
    try:
        cfg.pipeline()
    except ValueError as exc:
        raise ConfigError("pipeline", str(exc)) from None
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    return parse_config(data)
