"""Eager reverse-mode autodiff over dense 2-D float64 arrays, plus Adam.

A :class:`Tape` records every primitive as it is evaluated. ``backward``
walks the records in reverse insertion order and accumulates gradients for
the leaves. Values are always 2-D; scalars are ``(1, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


def _as_matrix(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got shape {arr.shape}")
    return arr


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


# --- primitive table -------------------------------------------------------
# forward(values, **attrs) -> value
# backward(g, values, out, **attrs) -> tuple of input gradients


def _fw_matmul(vals):
    a, b = vals
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b


def _bw_matmul(g, vals, out):
    a, b = vals
    return g @ b.T, a.T @ g


def _fw_add(vals):
    _broadcast_shape("add", *vals)
    return vals[0] + vals[1]


def _bw_add(g, vals, out):
    return _unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)


def _fw_sub(vals):
    _broadcast_shape("sub", *vals)
    return vals[0] - vals[1]


def _bw_sub(g, vals, out):
    return _unbroadcast(g, vals[0].shape), _unbroadcast(-g, vals[1].shape)


def _fw_mul(vals):
    _broadcast_shape("mul", *vals)
    return vals[0] * vals[1]


def _bw_mul(g, vals, out):
    a, b = vals
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _fw_div(vals):
    _broadcast_shape("div", *vals)
    return vals[0] / vals[1]


def _bw_div(g, vals, out):
    a, b = vals
    return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)


def _fw_scale(vals, factor):
    return vals[0] * factor


def _bw_scale(g, vals, out, factor):
    return (g * factor,)


def _fw_leaky_relu(vals, slope):
    x = vals[0]
    return np.where(x > 0, x, slope * x)


def _bw_leaky_relu(g, vals, out, slope):
    return (np.where(vals[0] > 0, g, slope * g),)


def _fw_tanh(vals):
    return np.tanh(vals[0])


def _bw_tanh(g, vals, out):
    return (g * (1.0 - out * out),)


def _fw_square(vals):
    return vals[0] * vals[0]


def _bw_square(g, vals, out):
    return (2.0 * vals[0] * g,)


def _fw_sqrt(vals):
    if np.any(vals[0] < 0):
        raise ValueError("sqrt of a negative entry")
    return np.sqrt(vals[0])


def _bw_sqrt(g, vals, out):
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(out > 0, 0.5 / out, 0.0)
    return (g * d,)


def _fw_abs(vals):
    return np.abs(vals[0])


def _bw_abs(g, vals, out):
    # subgradient 0 at 0
    return (g * np.sign(vals[0]),)


def _fw_l1(vals):
    return np.abs(vals[0]).sum().reshape(1, 1)


def _bw_l1(g, vals, out):
    return (g * np.sign(vals[0]),)


def _fw_l2(vals):
    return np.sqrt((vals[0] ** 2).sum()).reshape(1, 1)


def _bw_l2(g, vals, out):
    r = out[0, 0]
    if r == 0.0:
        return (np.zeros_like(vals[0]),)
    return (g * vals[0] / r,)


def _fw_row_norm(vals):
    return np.sqrt((vals[0] ** 2).sum(axis=1, keepdims=True))


def _bw_row_norm(g, vals, out):
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(out > 0, vals[0] / out, 0.0)
    return (g * unit,)


def _fw_sum(vals, axis):
    if axis is None:
        return vals[0].sum().reshape(1, 1)
    return vals[0].sum(axis=axis, keepdims=True)


def _bw_sum(g, vals, out, axis):
    return (np.broadcast_to(g, vals[0].shape).copy(),)


def _fw_mean(vals, axis):
    if vals[0].size == 0:
        raise ShapeError("mean of an empty matrix")
    if axis is None:
        return vals[0].mean().reshape(1, 1)
    return vals[0].mean(axis=axis, keepdims=True)


def _bw_mean(g, vals, out, axis):
    x = vals[0]
    count = x.size if axis is None else x.shape[axis]
    return (np.broadcast_to(g / count, x.shape).copy(),)


def _fw_concat(vals):
    a, b = vals
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"concat_cols: row counts differ, shapes {a.shape} and {b.shape}")
    return np.concatenate([a, b], axis=1)


def _bw_concat(g, vals, out):
    split = vals[0].shape[1]
    return g[:, :split], g[:, split:]


def _fw_transpose(vals):
    return vals[0].T.copy()


def _bw_transpose(g, vals, out):
    return (g.T.copy(),)


def _std_parts(x, axis):
    centered = x - x.mean(axis=axis, keepdims=True)
    var = (centered ** 2).mean(axis=axis, keepdims=True)
    return centered, np.sqrt(var)


def _fw_std(vals, axis):
    x = vals[0]
    if axis is None:
        x = x.reshape(-1, 1)
    if x.shape[0 if axis in (None, 0) else 1] < 2:
        raise ShapeError(f"std: need at least 2 entries along the reduced axis, got shape {vals[0].shape}")
    _, sd = _std_parts(x, 0 if axis is None else axis)
    return sd.reshape(1, 1) if axis is None else sd


def _bw_std(g, vals, out, axis):
    x = vals[0]
    flat = axis is None
    if flat:
        x = x.reshape(-1, 1)
        ax = 0
    else:
        ax = axis
    centered, sd = _std_parts(x, ax)
    count = x.shape[ax]
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(sd > 0, centered / (count * sd), 0.0)
    grad = g.reshape(1, 1) * d if flat else g * d
    return (grad.reshape(vals[0].shape),)


def _fw_mb_stddev(vals):
    x = vals[0]
    if x.shape[0] < 2:
        raise ShapeError(f"minibatch stddev needs a batch of at least 2, got shape {x.shape}")
    _, sd = _std_parts(x, 0)
    return sd.mean().reshape(1, 1)


def _bw_mb_stddev(g, vals, out):
    x = vals[0]
    k, f = x.shape
    centered, sd = _std_parts(x, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(sd > 0, centered / (k * sd), 0.0)
    return (g[0, 0] * d / f,)


def _fw_cosine(vals):
    a, b = vals
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity: shapes differ, {a.shape} and {b.shape}")
    na = np.sqrt((a * a).sum(axis=1, keepdims=True))
    nb = np.sqrt((b * b).sum(axis=1, keepdims=True))
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine_similarity of a zero row")
    return (a * b).sum(axis=1, keepdims=True) / (na * nb)


def _bw_cosine(g, vals, out):
    a, b = vals
    na = np.sqrt((a * a).sum(axis=1, keepdims=True))
    nb = np.sqrt((b * b).sum(axis=1, keepdims=True))
    ga = b / (na * nb) - out * a / (na * na)
    gb = a / (na * nb) - out * b / (nb * nb)
    return g * ga, g * gb


PRIMITIVES: Dict[str, tuple] = {
    "matmul": (_fw_matmul, _bw_matmul),
    "add": (_fw_add, _bw_add),
    "sub": (_fw_sub, _bw_sub),
    "mul": (_fw_mul, _bw_mul),
    "div": (_fw_div, _bw_div),
    "scale": (_fw_scale, _bw_scale),
    "leaky_relu": (_fw_leaky_relu, _bw_leaky_relu),
    "tanh": (_fw_tanh, _bw_tanh),
    "square": (_fw_square, _bw_square),
    "sqrt": (_fw_sqrt, _bw_sqrt),
    "abs": (_fw_abs, _bw_abs),
    "l1_norm": (_fw_l1, _bw_l1),
    "l2_norm": (_fw_l2, _bw_l2),
    "row_norm": (_fw_row_norm, _bw_row_norm),
    "sum": (_fw_sum, _bw_sum),
    "mean": (_fw_mean, _bw_mean),
    "concat_cols": (_fw_concat, _bw_concat),
    "transpose": (_fw_transpose, _bw_transpose),
    "std": (_fw_std, _bw_std),
    "mb_stddev": (_fw_mb_stddev, _bw_mb_stddev),
    "cosine_similarity": (_fw_cosine, _bw_cosine),
}


class _Record:
    __slots__ = ("kind", "inputs", "value", "attrs", "requires_grad")

    def __init__(self, kind, inputs, value, attrs, requires_grad):
        self.kind = kind
        self.inputs = inputs
        self.value = value
        self.attrs = attrs
        self.requires_grad = requires_grad


class Node:
    """Handle to a value recorded on a tape. Supports ``+ - * / @``."""

    __slots__ = ("tape", "id")

    def __init__(self, tape: "Tape", node_id: int):
        self.tape = tape
        self.id = node_id

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.id].value

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def item(self) -> float:
        return float(self.value[0, 0])

    def _lift(self, other) -> "Node":
        if isinstance(other, Node):
            return other
        return self.tape.constant(other)

    def __add__(self, other):
        return self.tape.record("add", self, self._lift(other))

    def __radd__(self, other):
        return self.tape.record("add", self._lift(other), self)

    def __sub__(self, other):
        return self.tape.record("sub", self, self._lift(other))

    def __rsub__(self, other):
        return self.tape.record("sub", self._lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.record("scale", self, factor=float(other))
        return self.tape.record("mul", self, self._lift(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.record("scale", self, factor=1.0 / float(other))
        return self.tape.record("div", self, self._lift(other))

    def __rtruediv__(self, other):
        return self.tape.record("div", self._lift(other), self)

    def __matmul__(self, other):
        return self.tape.record("matmul", self, self._lift(other))

    def __neg__(self):
        return self.tape.record("scale", self, factor=-1.0)

    @property
    def T(self):
        return self.tape.record("transpose", self)

    def __repr__(self):
        rec = self.tape.nodes[self.id]
        return f"Node(id={self.id}, kind={rec.kind}, shape={rec.value.shape})"


class Gradients(dict):
    """Leaf gradients keyed by node id; also indexable by :class:`Node`."""

    def __getitem__(self, key):
        if isinstance(key, Node):
            key = key.id
        return super().__getitem__(key)


class Tape:
    """Ordered record of evaluated primitives. Single owner, not thread-safe."""

    def __init__(self):
        self.nodes: list[_Record] = []

    def _append(self, record: _Record) -> Node:
        self.nodes.append(record)
        return Node(self, len(self.nodes) - 1)

    def leaf(self, value, requires_grad: bool = True) -> Node:
        arr = _as_matrix(value)
        if not np.all(np.isfinite(arr)):
            raise ValueError("leaf values must be finite")
        return self._append(_Record("leaf", (), arr, {}, requires_grad))

    def constant(self, value) -> Node:
        return self.leaf(value, requires_grad=False)

    def record(self, kind: str, *inputs: Node, **attrs) -> Node:
        """Evaluate primitive ``kind`` eagerly and append it to the tape."""
        try:
            forward, _ = PRIMITIVES[kind]
        except KeyError:
            raise ValueError(f"unknown primitive {kind!r}") from None
        for node in inputs:
            if node.tape is not self:
                raise ValueError("input node belongs to a different tape")
        vals = [self.nodes[n.id].value for n in inputs]
        value = forward(vals, **attrs)
        grad = any(self.nodes[n.id].requires_grad for n in inputs)
        return self._append(_Record(kind, tuple(n.id for n in inputs), value, attrs, grad))

    def backward(self, output: Node) -> Gradients:
        """Return d(output)/d(leaf) for every gradient-tracking leaf."""
        out_rec = self.nodes[output.id]
        if out_rec.value.shape != (1, 1):
            raise ShapeError(f"backward needs a 1x1 output, got shape {out_rec.value.shape}")
        grads: dict[int, np.ndarray] = {output.id: np.ones((1, 1))}
        for idx in range(output.id, -1, -1):
            g = grads.get(idx)
            rec = self.nodes[idx]
            if g is None or rec.kind == "leaf" or not rec.requires_grad:
                continue
            _, backward = PRIMITIVES[rec.kind]
            vals = [self.nodes[i].value for i in rec.inputs]
            in_grads = backward(g, vals, rec.value, **rec.attrs)
            for i, gi in zip(rec.inputs, in_grads):
                if not self.nodes[i].requires_grad:
                    continue
                if i in grads:
                    grads[i] = grads[i] + gi
                else:
                    grads[i] = gi
        result = Gradients()
        for idx, rec in enumerate(self.nodes):
            if rec.kind == "leaf" and rec.requires_grad:
                g = grads.get(idx)
                result[idx] = np.zeros_like(rec.value) if g is None else g
        return result


# --- functional helpers ----------------------------------------------------


def record_primitive(tape: Tape, kind: str, inputs: Sequence[Node], **attrs) -> Node:
    return tape.record(kind, *inputs, **attrs)


def backward(tape: Tape, output: Node) -> Gradients:
    return tape.backward(output)


def matmul(a: Node, b: Node) -> Node:
    return a.tape.record("matmul", a, b)


def leaky_relu(x: Node, slope: float = 0.2) -> Node:
    return x.tape.record("leaky_relu", x, slope=float(slope))


def tanh(x: Node) -> Node:
    return x.tape.record("tanh", x)


def square(x: Node) -> Node:
    return x.tape.record("square", x)


def sqrt(x: Node) -> Node:
    return x.tape.record("sqrt", x)


def absolute(x: Node) -> Node:
    return x.tape.record("abs", x)


def l1_norm(x: Node) -> Node:
    return x.tape.record("l1_norm", x)


def l2_norm(x: Node) -> Node:
    return x.tape.record("l2_norm", x)


def row_norm(x: Node) -> Node:
    return x.tape.record("row_norm", x)


def total(x: Node, axis=None) -> Node:
    return x.tape.record("sum", x, axis=axis)


def mean(x: Node, axis=None) -> Node:
    return x.tape.record("mean", x, axis=axis)


def std(x: Node, axis=None) -> Node:
    """Population standard deviation; subgradient 0 where the spread is 0."""
    return x.tape.record("std", x, axis=axis)


def concat_cols(a: Node, b: Node) -> Node:
    return a.tape.record("concat_cols", a, b)


def minibatch_stddev(x: Node) -> Node:
    return x.tape.record("mb_stddev", x)


def cosine_similarity(a: Node, b: Node) -> Node:
    """Row-wise cosine similarity of two k x n matrices, as a k x 1 column."""
    return a.tape.record("cosine_similarity", a, b)


def value_and_grad(f: Callable[..., Node], *args, argnums: Sequence[int] | None = None):
    """Evaluate scalar ``f`` on fresh leaves and return ``(value, grads)``.

    ``grads`` is a tuple aligned with ``argnums`` (all arguments by default).
    """
    if argnums is None:
        argnums = range(len(args))
    argnums = tuple(argnums)
    tape = Tape()
    nodes = [tape.leaf(a, requires_grad=i in argnums) for i, a in enumerate(args)]
    out = f(*nodes)
    grads = tape.backward(out)
    return out.item(), tuple(grads[nodes[i]] for i in argnums)


# --- gradient checking -----------------------------------------------------


@dataclass
class GradientCheck:
    max_error: float
    errors: np.ndarray
    kinks: list = field(default_factory=list)
    nonfinite: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.nonfinite


def check_gradient(f: Callable[[Node], Node], point, step: float = 1e-5,
                   kink_tol: float = 1e-6) -> GradientCheck:
    """Compare autodiff against central differences coordinate by coordinate.

    The error for a coordinate is ``|auto - central| / max(1, |central|)``.
    A kink inside the stencil is detected by comparing second differences at
    ``step`` and ``step / 2``: for a smooth function ``d(h) - 2 d(h/2)`` is
    third order in ``h``, across a kink it is of the order of the slope jump.
    Coordinates where it exceeds ``kink_tol * max(1, |central|)`` are listed
    in ``kinks`` and left out of ``max_error``. Coordinates with a non-finite
    probe are listed in ``nonfinite``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = _as_matrix(point)

    def evaluate(v):
        tape = Tape()
        return f(tape.constant(v)).item()

    def probe(idx, h):
        v = x.copy()
        v[idx] += h
        return evaluate(v)

    _, (auto,) = value_and_grad(f, x)
    f0 = evaluate(x)
    errors = np.zeros_like(x)
    kinks, nonfinite = [], []
    for idx in np.ndindex(*x.shape):
        f_hi, f_lo = probe(idx, step), probe(idx, -step)
        h_hi, h_lo = probe(idx, step / 2), probe(idx, -step / 2)
        if not all(np.isfinite(v) for v in (f_hi, f_lo, h_hi, h_lo)):
            nonfinite.append(idx)
            errors[idx] = np.nan
            continue
        central = (f_hi - f_lo) / (2 * step)
        scale = max(1.0, abs(central))
        d_full = (f_hi - 2 * f0 + f_lo) / step
        d_half = (h_hi - 2 * f0 + h_lo) / (step / 2)
        if abs(d_full - 2 * d_half) > kink_tol * scale:
            kinks.append(idx)
            continue
        errors[idx] = abs(auto[idx] - central) / scale
    finite = errors[np.isfinite(errors)]
    return GradientCheck(float(finite.max()) if finite.size else 0.0, errors, kinks, nonfinite)


# --- Adam -------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Mapping[str, np.ndarray],
              grads: Mapping[str, np.ndarray]) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update. Inputs are not mutated."""
    missing = set(params) - set(grads)
    if missing:
        raise KeyError(f"missing gradients for {sorted(missing)}")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {key!r} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(key)
        v = state.v.get(key)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params[key] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[key] = m
        new_v[key] = v
    return new_params, AdamState(state.lr, b1, b2, state.eps, t, new_m, new_v)
