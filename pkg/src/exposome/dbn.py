"""Restricted Boltzmann machines stacked into a deep belief network.

Each RBM is trained with one-step contrastive divergence; layers are
trained greedily bottom-up and frozen, and the top layer's hidden
probabilities serve as features for downstream classifiers.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyBatch, EmptyData, InvalidSizes

MODEL_FORMAT = "exposome-dbn"
MODEL_VERSION = 1


def sigmoid(x):
    # tanh form is overflow-free and gives exactly 0.5 at 0
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def _softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True, eq=False)
class RbmLayer:
    W: np.ndarray  # visible x hidden
    a: np.ndarray  # visible bias
    b: np.ndarray  # hidden bias

    def __post_init__(self):
        W = np.array(self.W, dtype=float, ndmin=2)
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if W.shape != (a.size, b.size):
            raise DimensionMismatch(f"W is {W.shape}, biases imply ({a.size}, {b.size})")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("RBM parameters must be finite")
        for name, arr in (("W", W), ("a", a), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmLayer":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, rng: np.random.Generator,
               sd: float = 0.01) -> "RbmLayer":
        return cls(rng.normal(0.0, sd, (n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    def transpose(self) -> "RbmLayer":
        """The same machine with the roles of visible and hidden swapped."""
        return RbmLayer(self.W.T, self.b, self.a)

    def equals(self, other: "RbmLayer") -> bool:
        return (np.array_equal(self.W, other.W) and np.array_equal(self.a, other.a)
                and np.array_equal(self.b, other.b))


def hidden_probs(layer: RbmLayer, v) -> np.ndarray:
    """P(h_j = 1 | v) = sigmoid(b_j + sum_i W_ij v_i), row-wise for 2-D input."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != layer.n_visible:
        raise DimensionMismatch(f"expected {layer.n_visible} visible units, got {v.shape[-1]}")
    return sigmoid(v @ layer.W + layer.b)


def visible_probs(layer: RbmLayer, h) -> np.ndarray:
    """P(v_i = 1 | h) = sigmoid(a_i + sum_j W_ij h_j)."""
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != layer.n_hidden:
        raise DimensionMismatch(f"expected {layer.n_hidden} hidden units, got {h.shape[-1]}")
    return sigmoid(h @ layer.W.T + layer.a)


def free_energy(layer: RbmLayer, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return -(v @ layer.a) - np.sum(_softplus(v @ layer.W + layer.b), axis=-1)


def cd1_step(layer: RbmLayer, batch, lr: float, rng: np.random.Generator,
             sample_visible: bool = False) -> tuple[RbmLayer, float]:
    """One contrastive-divergence update on a mini-batch.

    The hidden layer is sampled once from the data; the reconstruction and
    the second hidden pass use probabilities unless ``sample_visible`` is
    set, in which case the reconstruction is also binarised. Returns the
    updated layer and the batch's mean squared reconstruction error.
    """
    v0 = np.asarray(batch, dtype=float)
    if v0.ndim != 2:
        v0 = np.atleast_2d(v0)
    if v0.shape[0] == 0:
        raise EmptyBatch("mini-batch has no rows")
    if v0.shape[1] != layer.n_visible:
        raise DimensionMismatch(f"expected {layer.n_visible} columns, got {v0.shape[1]}")
    m = v0.shape[0]
    ph0 = hidden_probs(layer, v0)
    h0 = (rng.random(ph0.shape) < ph0).astype(float)
    v1 = visible_probs(layer, h0)
    err = float(np.mean((v0 - v1) ** 2))
    if sample_visible:
        v1 = (rng.random(v1.shape) < v1).astype(float)
    h1 = hidden_probs(layer, v1)
    dW = (v0.T @ h0 - v1.T @ h1) / m
    da = np.mean(v0 - v1, axis=0)
    db = np.mean(h0 - h1, axis=0)
    return RbmLayer(layer.W + lr * dW, layer.a + lr * da, layer.b + lr * db), err


def reconstruction_error(layer: RbmLayer, data) -> float:
    """Mean squared error of the mean-field reconstruction v -> h -> v."""
    v = np.asarray(data, dtype=float)
    return float(np.mean((v - visible_probs(layer, hidden_probs(layer, v))) ** 2))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    sample_visible: bool = False
    init_sd: float = 0.01

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def default_layer_sizes(n_inputs: int) -> list[int]:
    return [n_inputs, math.ceil(2 * n_inputs / 3), math.ceil(n_inputs / 3)]


def train_rbm(data: np.ndarray, n_hidden: int, cfg: TrainConfig, rng: np.random.Generator):
    """Train one RBM.

    Returns the layer and, per epoch, the mean-field reconstruction error of
    the full training set after that epoch's updates.
    """
    layer = RbmLayer.random(data.shape[1], n_hidden, rng, cfg.init_sd)
    history = []
    n = data.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch = data[order[start:start + cfg.batch_size]]
            layer, _ = cd1_step(layer, batch, cfg.learning_rate, rng, cfg.sample_visible)
        history.append(reconstruction_error(layer, data))
    return layer, history


@dataclass(frozen=True, eq=False)
class DbnModel:
    layers: tuple
    layer_sizes: tuple
    config: TrainConfig = field(default_factory=TrainConfig)
    history: tuple = ()  # per layer, per epoch reconstruction error

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "config": asdict(self.config),
            "layers": [{"W": l.W.tolist(), "a": l.a.tolist(), "b": l.b.tolist()} for l in self.layers],
            "history": [list(h) for h in self.history],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "DbnModel":
        if d.get("format") != MODEL_FORMAT or d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model document {d.get('format')!r} v{d.get('version')}")
        layers = tuple(RbmLayer(np.array(l["W"], dtype=float).reshape(len(l["a"]), len(l["b"])),
                                l["a"], l["b"]) for l in d["layers"])
        return cls(layers, tuple(d["layer_sizes"]), TrainConfig(**d["config"]),
                   tuple(tuple(h) for h in d.get("history", ())))

    @classmethod
    def from_json(cls, text: str) -> "DbnModel":
        return cls.from_dict(json.loads(text))


def train_dbn(data, cfg: TrainConfig | None = None, sizes=None) -> DbnModel:
    """Greedy layer-wise training of a stack of RBMs.

    ``sizes`` lists the input width followed by each hidden width, e.g.
    ``[12, 8, 4]`` gives two RBMs. Each RBM after the first is trained on
    the hidden probabilities of the (frozen) layer below.
    """
    cfg = cfg or TrainConfig()
    x = np.asarray(data, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyData("training data must be a non-empty 2-D matrix")
    if np.any(np.isnan(x)):
        raise ValueError("training data contains missing values")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("training data must lie in [0, 1]")
    sizes = list(sizes) if sizes is not None else default_layer_sizes(x.shape[1])
    if len(sizes) < 2 or any(int(s) != s or s < 1 for s in sizes):
        raise InvalidSizes(f"need input width plus >= 1 hidden width, got {sizes}")
    if sizes[0] != x.shape[1]:
        raise InvalidSizes(f"input width {sizes[0]} does not match data width {x.shape[1]}")
    rng = np.random.default_rng(cfg.seed)
    layers, history = [], []
    inputs = x
    for n_hidden in sizes[1:]:
        layer, hist = train_rbm(inputs, int(n_hidden), cfg, rng)
        layers.append(layer)
        history.append(tuple(hist))
        inputs = hidden_probs(layer, inputs)
    return DbnModel(tuple(layers), tuple(int(s) for s in sizes), cfg, tuple(history))


def extract_features(model: DbnModel, data) -> np.ndarray:
    """Deterministic upward pass; returns top-layer hidden probabilities."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(f"model expects {model.layer_sizes[0]} inputs, got {x.shape[1]}")
    for layer in model.layers:
        x = hidden_probs(layer, x)
    return x
