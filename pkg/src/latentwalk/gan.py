"""Fully-connected generator and Wasserstein critic trained on 2-D toy data."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Node, Tape, adam_step

FORMAT_VERSION = 1
DATASET_KINDS = ("gaussian-ring", "two-moons", "labeled-modes")


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, detail: str = ""):
        super().__init__(f"non-finite loss at iteration {iteration}{': ' + detail if detail else ''}")
        self.iteration = iteration


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple
    slope: float = 0.2
    output_activation: str = "identity"
    minibatch_stddev: bool = False

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least 2 layer widths")
        if any(w <= 0 for w in self.widths):
            raise ValueError(f"layer widths must be positive, got {self.widths}")
        if self.output_activation not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {self.output_activation!r}")

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def weight_shapes(self) -> list[tuple]:
        shapes = []
        last = len(self.widths) - 2
        for i, (fan_in, fan_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            if i == last and self.minibatch_stddev:
                fan_in += 1
            shapes.append((fan_out, fan_in))
        return shapes


@dataclass(frozen=True)
class MlpParams:
    """Weights are stored ``out x in``; biases ``1 x out``."""

    spec: MlpSpec
    weights: tuple
    biases: tuple

    def as_dict(self) -> dict:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        return out

    def replace(self, arrays: dict) -> "MlpParams":
        n = len(self.weights)
        return MlpParams(self.spec,
                         tuple(arrays[f"W{i}"] for i in range(n)),
                         tuple(arrays[f"b{i}"] for i in range(n)))

    def place(self, tape: Tape, trainable: bool = False) -> dict:
        return {k: tape.leaf(v, requires_grad=trainable) for k, v in self.as_dict().items()}


def init_mlp(spec: MlpSpec, seed: int) -> MlpParams:
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for shape in spec.weight_shapes():
        fan_out, fan_in = shape
        weights.append(rng.standard_normal(shape) / math.sqrt(fan_in))
        biases.append(np.zeros((1, fan_out)))
    return MlpParams(spec, tuple(weights), tuple(biases))


def mlp_forward(spec: MlpSpec, nodes: dict, x: Node) -> tuple[Node, Node]:
    """Run the MLP on the tape. Returns ``(output, penultimate features)``."""
    if x.shape[1] != spec.in_dim:
        raise ad.ShapeError(f"input has {x.shape[1]} columns, network expects {spec.in_dim}")
    n_layers = len(spec.widths) - 1
    h = x
    features = x
    for i in range(n_layers):
        if i == n_layers - 1:
            features = h
            if spec.minibatch_stddev:
                s = ad.minibatch_stddev(h)
                ones = h.tape.constant(np.ones((h.shape[0], 1)))
                h = ad.concat_cols(h, ones * s)
        h = h @ nodes[f"W{i}"].T + nodes[f"b{i}"]
        if i < n_layers - 1:
            h = ad.leaky_relu(h, spec.slope)
        elif spec.output_activation == "tanh":
            h = ad.tanh(h)
    return h, features


def generate_node(gen: MlpParams, z: Node, nodes: Optional[dict] = None) -> Node:
    nodes = gen.place(z.tape) if nodes is None else nodes
    out, _ = mlp_forward(gen.spec, nodes, z)
    return out


def generate(gen: MlpParams, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.shape[1] != gen.spec.in_dim:
        raise ad.ShapeError(f"latent batch has {Z.shape[1]} columns, generator expects {gen.spec.in_dim}")
    tape = Tape()
    return generate_node(gen, tape.constant(Z)).value


@dataclass
class CriticOutput:
    scores: np.ndarray
    features: np.ndarray


def minibatch_stddev_feature(batch) -> float:
    """Mean over features of the population std across the batch."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[:, None]
    if batch.shape[0] < 2:
        raise ad.ShapeError(f"minibatch stddev needs at least 2 rows, got {batch.shape[0]}")
    tape = Tape()
    return ad.minibatch_stddev(tape.constant(batch)).item()


def criticize_node(critic: MlpParams, X: Node, nodes: Optional[dict] = None) -> tuple[Node, Node]:
    """Scores (k x 1) and penultimate features on the tape."""
    if critic.spec.minibatch_stddev and X.shape[0] < 2:
        raise ad.ShapeError(f"critic with minibatch stddev needs a batch of at least 2, got {X.shape[0]}")
    nodes = critic.place(X.tape) if nodes is None else nodes
    return mlp_forward(critic.spec, nodes, X)


def criticize(critic: MlpParams, X) -> CriticOutput:
    X = np.asarray(X, dtype=np.float64)
    tape = Tape()
    scores, feats = criticize_node(critic, tape.constant(X))
    return CriticOutput(scores.value[:, 0].copy(), feats.value.copy())


def critic_features(critic: MlpParams, X) -> np.ndarray:
    """Penultimate activations; row-independent, so any batch size works."""
    X = np.asarray(X, dtype=np.float64)
    tape = Tape()
    nodes = critic.place(tape)
    n_layers = len(critic.spec.widths) - 1
    h = tape.constant(X)
    for i in range(n_layers - 1):
        h = ad.leaky_relu(h @ nodes[f"W{i}"].T + nodes[f"b{i}"], critic.spec.slope)
    return h.value


def critic_features_node(critic: MlpParams, X: Node, nodes: Optional[dict] = None) -> Node:
    nodes = critic.place(X.tape) if nodes is None else nodes
    h = X
    for i in range(len(critic.spec.widths) - 2):
        h = ad.leaky_relu(h @ nodes[f"W{i}"].T + nodes[f"b{i}"], critic.spec.slope)
    return h


# --- datasets ---------------------------------------------------------------

RING_MODES = 8
RING_RADIUS = 1.0
RING_STD = 0.05
RING_WEIGHTS = np.array([0.3] + [0.1] * 7)


def ring_centers() -> np.ndarray:
    angles = 2 * np.pi * np.arange(RING_MODES) / RING_MODES
    return RING_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)


LABELED_CENTERS = np.array([[-1.0, 0.0], [1.0, 0.0]])
LABELED_STD = 0.1


def mode_centers(kind: str) -> np.ndarray:
    if kind == "gaussian-ring":
        return ring_centers()
    if kind == "labeled-modes":
        return LABELED_CENTERS.copy()
    raise ValueError(f"dataset {kind!r} has no discrete mode centers")


def sample_dataset(kind: str, count: int, seed: int) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Return ``(points, labels)``; points are ``count x 2``."""
    if kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {DATASET_KINDS}")
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    if kind == "two-moons":
        if count == 0:
            return np.zeros((0, 2)), np.zeros(0, dtype=int)
        from sklearn.datasets import make_moons

        X, y = make_moons(count, noise=0.05, random_state=int(rng.integers(2**31)))
        return X.astype(np.float64), y.astype(int)
    if kind == "gaussian-ring":
        centers, weights, sd = ring_centers(), RING_WEIGHTS, RING_STD
    else:
        centers, sd = LABELED_CENTERS, LABELED_STD
        weights = np.full(len(centers), 1.0 / len(centers))
    labels = rng.choice(len(centers), size=count, p=weights)
    points = centers[labels] + sd * rng.standard_normal((count, 2))
    return points, labels


# --- training ---------------------------------------------------------------


@dataclass
class TrainConfig:
    critic_steps: int = 5
    batch_size: int = 64
    clip: float = 0.05
    drift: float = 1e-3
    lr: float = 1e-4
    iterations: int = 20000
    seed: int = 0
    beta1: float = 0.5
    beta2: float = 0.9

    def __post_init__(self):
        for name in ("critic_steps", "batch_size", "iterations"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.clip <= 0 or self.lr <= 0 or self.drift < 0:
            raise ValueError("clip and lr must be positive, drift non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")


def default_generator_spec(latent_dim: int = 16, data_dim: int = 2) -> MlpSpec:
    return MlpSpec((latent_dim, 64, 64, data_dim), slope=0.2)


def default_critic_spec(data_dim: int = 2) -> MlpSpec:
    return MlpSpec((data_dim, 64, 64, 1), slope=0.2, minibatch_stddev=True)


@dataclass
class TrainHistory:
    critic_loss: list = field(default_factory=list)
    generator_loss: list = field(default_factory=list)


def _critic_loss(critic, real, fake, drift):
    def loss(tape, nodes):
        s_real, _ = criticize_node(critic, tape.constant(real), nodes)
        s_fake, _ = criticize_node(critic, tape.constant(fake), nodes)
        both = ad.concat_cols(s_real.T, s_fake.T)
        return ad.mean(s_fake) - ad.mean(s_real) + drift * ad.mean(ad.square(both))
    return loss


def train_wgan(gen_spec: MlpSpec, critic_spec: MlpSpec, data: np.ndarray, config: TrainConfig,
               callback: Optional[Callable[[int, float, float], None]] = None):
    """Alternate critic and generator Adam updates with weight clipping.

    Returns ``(generator, critic, history)``. Bitwise reproducible given
    the data and ``config.seed``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.shape[1] != gen_spec.out_dim or data.shape[1] != critic_spec.in_dim:
        raise ad.ShapeError("data dimension does not match the network specs")
    if len(data) == 0 or not np.all(np.isfinite(data)):
        raise ValueError("training data must be non-empty and finite")
    rng = np.random.default_rng(config.seed)
    gen_seed, critic_seed = (int(s) for s in rng.integers(0, 2**31, size=2))
    gen = init_mlp(gen_spec, gen_seed)
    critic = init_mlp(critic_spec, critic_seed)
    critic = critic.replace({k: np.clip(v, -config.clip, config.clip) for k, v in critic.as_dict().items()})
    g_state = AdamState(config.lr, config.beta1, config.beta2)
    c_state = AdamState(config.lr, config.beta1, config.beta2)
    k, n = config.batch_size, gen_spec.in_dim
    history = TrainHistory()

    for it in range(config.iterations):
        for _ in range(config.critic_steps):
            real = data[rng.integers(0, len(data), size=k)]
            fake = generate(gen, rng.standard_normal((k, n)))
            tape = Tape()
            nodes = critic.place(tape, trainable=True)
            loss = _critic_loss(critic, real, fake, config.drift)(tape, nodes)
            c_loss = loss.item()
            if not math.isfinite(c_loss):
                raise TrainingDiverged(it, "critic")
            grads = tape.backward(loss)
            new, c_state = adam_step(c_state, critic.as_dict(), {key: grads[node] for key, node in nodes.items()})
            critic = critic.replace({key: np.clip(v, -config.clip, config.clip) for key, v in new.items()})

        tape = Tape()
        g_nodes = gen.place(tape, trainable=True)
        fake = generate_node(gen, tape.constant(rng.standard_normal((k, n))), g_nodes)
        scores, _ = criticize_node(critic, fake)
        loss = -ad.mean(scores)
        g_loss = loss.item()
        if not math.isfinite(g_loss):
            raise TrainingDiverged(it, "generator")
        grads = tape.backward(loss)
        new, g_state = adam_step(g_state, gen.as_dict(), {key: grads[node] for key, node in g_nodes.items()})
        gen = gen.replace(new)
        history.critic_loss.append(c_loss)
        history.generator_loss.append(g_loss)
        if callback is not None:
            callback(it, c_loss, g_loss)
    return gen, critic, history


# --- checkpoints ------------------------------------------------------------


def _params_to_json(params: MlpParams) -> dict:
    spec = asdict(params.spec)
    spec["widths"] = list(spec["widths"])
    return {
        "spec": spec,
        "weights": [{"shape": list(w.shape), "data": w.ravel().tolist()} for w in params.weights],
        "biases": [{"shape": list(b.shape), "data": b.ravel().tolist()} for b in params.biases],
    }


def _params_from_json(obj: dict) -> MlpParams:
    spec = MlpSpec(**obj["spec"])
    weights = tuple(np.array(w["data"], dtype=np.float64).reshape(w["shape"]) for w in obj["weights"])
    biases = tuple(np.array(b["data"], dtype=np.float64).reshape(b["shape"]) for b in obj["biases"])
    expected = spec.weight_shapes()
    if [w.shape for w in weights] != expected or [b.shape for b in biases] != [(1, s[0]) for s in expected]:
        raise ValueError("checkpoint weight shapes do not match the stored spec")
    return MlpParams(spec, weights, biases)


def checkpoint_dict(gen: MlpParams, critic: MlpParams, seed: int) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "generator": _params_to_json(gen),
        "critic": _params_to_json(critic),
        "training_seed": int(seed),
    }


def dumps_checkpoint(gen: MlpParams, critic: MlpParams, seed: int) -> str:
    return json.dumps(checkpoint_dict(gen, critic, seed), indent=1)


def loads_checkpoint(text: str) -> tuple[MlpParams, MlpParams, int]:
    obj = json.loads(text)
    version = obj.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version {version!r}")
    return _params_from_json(obj["generator"]), _params_from_json(obj["critic"]), int(obj["training_seed"])


def save_checkpoint(path, gen: MlpParams, critic: MlpParams, seed: int) -> None:
    from .io import atomic_write_text

    atomic_write_text(path, dumps_checkpoint(gen, critic, seed))


def load_checkpoint(path) -> tuple[MlpParams, MlpParams, int]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return loads_checkpoint(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"cannot load checkpoint {path}: {exc}") from exc
