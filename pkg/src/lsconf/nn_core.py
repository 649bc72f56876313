"""Dense feed-forward network with hand-written backprop, SGD-momentum and Adam.

Checkpoint layout (little-endian throughout)::

    8 bytes   magic b"LSCKPT\\x00\\x01"
    uint32    format version (1)
    uint32    length L of the JSON header
    L bytes   UTF-8 JSON: {"layers": [{"in", "out", "activation", "role"}, ...]}
    then, per layer in header order, W (out x in, row-major) and b (out) as float64
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

CHECKPOINT_MAGIC = b"LSCKPT\x00\x01"
CHECKPOINT_VERSION = 1
ACTIVATIONS = ("relu", "identity")


class ConfigError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class StaleCacheError(RuntimeError):
    pass


class DivergenceError(FloatingPointError):
    """Non-finite gradient or parameter encountered during an update."""


@dataclass
class Dense:
    W: np.ndarray
    b: np.ndarray
    activation: str = "identity"
    role: str = "hidden"

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


@dataclass
class MLPModel:
    layers: list[Dense]
    head: Dense | None = None
    version: int = 0

    @property
    def all_layers(self) -> list[Dense]:
        return self.layers + ([self.head] if self.head is not None else [])

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def embedding_dim(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.all_layers:
            out += [layer.W, layer.b]
        return out

    def copy(self) -> "MLPModel":
        return MLPModel([Dense(l.W.copy(), l.b.copy(), l.activation, l.role) for l in self.layers],
                        None if self.head is None else Dense(self.head.W.copy(), self.head.b.copy(),
                                                             self.head.activation, self.head.role),
                        self.version)


def _init_layer(rng, n_in, n_out, activation, role):
    if activation == "relu":
        std = np.sqrt(2.0 / n_in)
    else:
        std = np.sqrt(2.0 / (n_in + n_out))
    return Dense(rng.normal(0.0, std, size=(n_out, n_in)), np.zeros(n_out), activation, role)


def init_model(sizes, activation: str = "relu", seed: int = 0, n_classes: int | None = None) -> MLPModel:
    """Build ``sizes[0] -> ... -> sizes[-1]``.

    Hidden layers use ``activation``; the last layer (the embedding, or
    bottleneck when it narrows the previous width) is linear. With
    ``n_classes`` a linear classification head is appended on top.
    He-normal init for relu layers, Xavier-normal otherwise; zero biases.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ConfigError("need at least an input and an output size")
    if any(s < 1 for s in sizes):
        raise ConfigError(f"layer sizes must be positive, got {sizes}")
    if activation not in ACTIVATIONS:
        raise ConfigError(f"activation must be one of {ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        act = "identity" if last else activation
        role = ("bottleneck" if len(sizes) > 2 and b < sizes[-2] else "embedding") if last else "hidden"
        layers.append(_init_layer(rng, a, b, act, role))
    head = _init_layer(rng, sizes[-1], n_classes, "identity", "head") if n_classes else None
    return MLPModel(layers, head)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]
    preacts: list[np.ndarray]
    embeddings: np.ndarray
    version: int


def forward(model: MLPModel, x, with_cache: bool = True):
    """Run the network. Returns ``(output, cache)``; output is logits when a head exists."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != model.input_dim:
        raise ShapeError(f"expected input of shape (B, {model.input_dim}), got {a.shape}")
    inputs, preacts = [], []
    emb = None
    for layer in model.all_layers:
        if layer.role == "head":
            emb = a
        inputs.append(a)
        z = a @ layer.W.T + layer.b
        preacts.append(z)
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    if emb is None:
        emb = a
    cache = ForwardCache(inputs, preacts, emb, model.version) if with_cache else None
    return a, cache


def predict(model: MLPModel, x) -> np.ndarray:
    return forward(model, x, with_cache=False)[0]


def backward(model: MLPModel, cache: ForwardCache, grad_out) -> list[np.ndarray]:
    """Gradients of the loss w.r.t. ``model.params()`` given d(loss)/d(output)."""
    if cache is None or cache.version != model.version or len(cache.inputs) != len(model.all_layers):
        raise StaleCacheError("cache does not belong to the current model state")
    g = np.asarray(grad_out, dtype=np.float64)
    grads: list[np.ndarray] = []
    for layer, a_in, z in zip(reversed(model.all_layers), reversed(cache.inputs), reversed(cache.preacts)):
        if layer.activation == "relu":
            g = g * (z > 0)
        grads += [g.sum(axis=0), g.T @ a_in]
        g = g @ layer.W
    grads.reverse()
    return grads


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    buffers: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("adam", "sgd_momentum"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        if self.learning_rate < 0 or self.epsilon <= 0:
            raise ConfigError("learning rate must be >= 0 and epsilon > 0")
        if not (0 <= self.momentum < 1 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("momentum and betas must lie in [0, 1)")


def step(model: MLPModel, grads: list[np.ndarray], state: OptimizerState) -> None:
    """Apply one update in place. Raises DivergenceError on non-finite values."""
    params = model.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise ShapeError("gradient shapes do not match parameters")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
    if not state.buffers:
        n_buf = 2 if state.kind == "adam" else 1
        state.buffers = [[np.zeros_like(p) for p in params] for _ in range(n_buf)]
    state.t += 1
    lr = state.learning_rate
    if state.kind == "sgd_momentum":
        (vel,) = state.buffers
        for p, g, v in zip(params, grads, vel):
            v *= state.momentum
            v += g
            p -= lr * v
    else:
        m, v = state.buffers
        b1, b2 = state.beta1, state.beta2
        c1 = 1.0 - b1 ** state.t
        c2 = 1.0 - b2 ** state.t
        for p, g, mi, vi in zip(params, grads, m, v):
            mi *= b1
            mi += (1.0 - b1) * g
            vi *= b2
            vi += (1.0 - b2) * g * g
            p -= lr * (mi / c1) / (np.sqrt(vi / c2) + state.epsilon)
    model.version += 1
    for p in params:
        if not np.all(np.isfinite(p)):
            raise DivergenceError("non-finite parameter after update")


def save_checkpoint(model: MLPModel, path) -> None:
    header = {"layers": [{"in": l.n_in, "out": l.n_out, "activation": l.activation, "role": l.role}
                         for l in model.all_layers]}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        f.write(blob)
        for l in model.all_layers:
            f.write(np.ascontiguousarray(l.W, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(l.b, dtype="<f8").tobytes())


def load_checkpoint(path) -> MLPModel:
    with open(path, "rb") as f:
        data = f.read()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not an lsconf checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    header = json.loads(data[16:16 + hlen])
    off = 16 + hlen
    layers, head = [], None
    for spec in header["layers"]:
        n_in, n_out = spec["in"], spec["out"]
        W = np.frombuffer(data, dtype="<f8", count=n_in * n_out, offset=off).reshape(n_out, n_in)
        off += 8 * n_in * n_out
        b = np.frombuffer(data, dtype="<f8", count=n_out, offset=off)
        off += 8 * n_out
        layer = Dense(W.astype(np.float64), b.astype(np.float64), spec["activation"], spec["role"])
        if spec["role"] == "head":
            head = layer
        else:
            layers.append(layer)
    if off != len(data):
        raise ValueError("trailing or missing bytes in checkpoint")
    return MLPModel(layers, head)
