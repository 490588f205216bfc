"""Deep feed-forward binary classifier in plain numpy.

tanh hidden layers, two independent sigmoid output nodes, per-node
binary cross-entropy, mini-batch SGD with heavy-ball momentum, L2 weight
penalty, epoch-wise learning-rate decay and early stopping on a
validation split.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

OUTPUT_DIM = 2


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int | None = None
    hidden_layers: int = 10
    hidden_width: int = 400
    output_dim: int = OUTPUT_DIM

    def __post_init__(self):
        if self.input_dim is not None and self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_layers < 1 or self.hidden_width < 1:
            raise ValueError("hidden_layers and hidden_width must be >= 1")
        if self.output_dim != OUTPUT_DIM:
            raise ValueError("the classifier has exactly two output nodes")

    def layer_sizes(self) -> list[int]:
        if self.input_dim is None:
            raise ValueError("input_dim is not set")
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    decay: float = 0.001
    momentum: float = 0.9
    l2: float = 1e-4
    max_epochs: int = 500
    patience: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.decay < 0 or self.l2 < 0:
            raise ValueError("decay and l2 must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.max_epochs < 1 or self.patience < 1 or self.batch_size < 1:
            raise ValueError("max_epochs, patience and batch_size must be >= 1")


@dataclass
class Network:
    config: NetworkConfig
    weights: list[np.ndarray]  # layer l maps fan_in -> fan_out, shape (fan_in, fan_out)
    biases: list[np.ndarray]

    def copy(self) -> Network:
        return Network(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases


class Gradients(NamedTuple):
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)
    validation_accuracy: list[float] = field(default_factory=list)
    learning_rate: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.learning_rate)


def init_network(config: NetworkConfig, seed: int | np.random.Generator = 0) -> Network:
    """Zero biases; weights ~ N(0, 2 / fan_in) per layer."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = config.layer_sizes()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(config, weights, biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward(network: Network, inputs) -> tuple[np.ndarray, list[np.ndarray]]:
    """Output probabilities and the per-layer activations (input first)."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != network.config.input_dim:
        raise ValueError(f"expected {network.config.input_dim} inputs per row, got {x.shape[1]}")
    acts = [x]
    a = x
    for w, b in zip(network.weights[:-1], network.biases[:-1]):
        a = np.tanh(a @ w + b)
        acts.append(a)
    logits = a @ network.weights[-1] + network.biases[-1]
    out = _sigmoid(logits)
    acts.append(logits)
    return (out[0] if single else out), acts


def weight_penalty(network: Network, l2: float) -> float:
    if l2 == 0:
        return 0.0
    return 0.5 * l2 * sum(float(np.sum(w * w)) for w in network.weights)


def loss(outputs, labels, network: Network | None = None, l2: float = 0.0) -> float:
    """Mean per-node binary cross-entropy plus ``l2/2 * sum(w**2)``."""
    p = np.clip(np.atleast_2d(np.asarray(outputs, dtype=np.float64)), 1e-300, None)
    q = np.clip(1.0 - p, 1e-300, None)
    y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    data = -float(np.mean(y * np.log(p) + (1.0 - y) * np.log(q)))
    return data + (weight_penalty(network, l2) if network is not None else 0.0)


def _logit_loss(logits: np.ndarray, labels: np.ndarray) -> float:
    # softplus(z) - y*z, the same quantity as ``loss`` without saturation
    return float(np.mean(np.logaddexp(0.0, logits) - labels * logits))


def backprop(network: Network, inputs, labels, l2: float = 0.0, cache=None) -> Gradients:
    """Exact gradient of ``loss`` over the batch w.r.t. every parameter."""
    y = np.atleast_2d(np.asarray(labels, dtype=np.float64))
    if cache is None:
        out, cache = forward(network, inputs)
    else:
        out = _sigmoid(cache[-1])
    out = np.atleast_2d(out)
    n = y.shape[0]
    delta = (out - y) / (n * y.shape[1])
    gw = [None] * network.n_layers
    gb = [None] * network.n_layers
    for layer in range(network.n_layers - 1, -1, -1):
        a_in = cache[layer]
        gw[layer] = a_in.T @ delta + l2 * network.weights[layer]
        gb[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ network.weights[layer].T) * (1.0 - a_in * a_in)
    return Gradients(gw, gb)


def lr_schedule(mu_prev: float, decay: float, epoch: int) -> float:
    """``mu_e = mu_{e-1} / (1 + decay * e)`` for epoch ``e >= 1``."""
    if epoch < 1:
        raise ValueError("epoch numbering starts at 1")
    return mu_prev / (1.0 + decay * epoch)


def momentum_step(params, grads, velocity, mu: float, momentum: float) -> None:
    """Heavy-ball update in place: ``v = m * v - mu * g``, ``w = w + v``."""
    for p, g, v in zip(params, grads, velocity):
        v *= momentum
        v -= mu * g
        p += v


def predict_proba(network: Network, rows) -> np.ndarray:
    out, _ = forward(network, np.atleast_2d(rows))
    return out


def predict(network: Network, rows) -> np.ndarray:
    """Index of the larger output; exact ties go to class 0 (DOWN)."""
    p = predict_proba(network, rows)
    return (p[:, 1] > p[:, 0]).astype(np.int64)


def evaluate(network: Network, inputs, labels) -> tuple[float, float]:
    """Data loss (no penalty) and accuracy."""
    _, acts = forward(network, inputs)
    logits = acts[-1]
    y = np.atleast_2d(labels)
    pred = (logits[:, 1] > logits[:, 0]).astype(np.int64)
    return _logit_loss(logits, y), float(np.mean(pred == y[:, 1]))


def train(
    network: Network,
    train_rows: tuple[np.ndarray, np.ndarray],
    validation_rows: tuple[np.ndarray, np.ndarray] | None,
    config: TrainConfig,
    *,
    epochs: int | None = None,
    rng: np.random.Generator | None = None,
    keep_initial: bool = False,
) -> tuple[Network, TrainReport]:
    """Mini-batch SGD with momentum; returns the best-validation snapshot.

    Without validation rows the loop runs for ``epochs`` (default
    ``max_epochs``) and returns the final parameters. With
    ``keep_initial`` the untrained state competes for "best" as epoch 0.
    The input network is not modified.
    """
    x, y = (np.asarray(a, dtype=np.float64) for a in train_rows)
    if x.shape[0] == 0:
        raise ValueError("empty training split")
    if validation_rows is not None and len(validation_rows[0]) == 0:
        raise ValueError("empty validation split")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n_epochs = epochs if epochs is not None else config.max_epochs

    net = network.copy()
    velocity = [np.zeros_like(p) for p in net.parameters()]
    report = TrainReport()
    best = None
    best_loss = math.inf
    since_best = 0
    if validation_rows is not None and keep_initial:
        best_loss, _ = evaluate(net, *validation_rows)
        best = net.copy()

    mu = config.learning_rate
    n = x.shape[0]
    report.stop_reason = "max_epochs"
    for epoch in range(1, n_epochs + 1):
        if epoch > 1:
            mu = lr_schedule(mu, config.decay, epoch - 1)
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            grads = backprop(net, x[idx], y[idx], config.l2)
            momentum_step(net.parameters(), grads.weights + grads.biases, velocity, mu, config.momentum)
        report.learning_rate.append(mu)
        report.train_loss.append(evaluate(net, x, y)[0] + weight_penalty(net, config.l2))

        if validation_rows is None:
            continue
        vloss, vacc = evaluate(net, *validation_rows)
        report.validation_loss.append(vloss)
        report.validation_accuracy.append(vacc)
        if vloss < best_loss:
            best_loss, best, since_best = vloss, net.copy(), 0
            report.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= config.patience:
                report.stop_reason = "early_stopping"
                break

    if validation_rows is None:
        report.best_epoch = report.epochs
        return net, report
    return best, report


def save_checkpoint(network: Network, path: str | Path, **metadata) -> None:
    """JSON checkpoint; floats are written in shortest round-trip form."""
    doc = {
        "format": "lagtrend-mlp/1",
        "config": asdict(network.config),
        "layers": [
            {"shape": list(w.shape), "weights": w.tolist(), "biases": b.tolist()}
            for w, b in zip(network.weights, network.biases)
        ],
        "metadata": metadata,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[Network, dict]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    config = NetworkConfig(**doc["config"])
    weights = [np.array(layer["weights"], dtype=np.float64).reshape(layer["shape"]) for layer in doc["layers"]]
    biases = [np.array(layer["biases"], dtype=np.float64) for layer in doc["layers"]]
    expected = config.layer_sizes()
    if [w.shape for w in weights] != list(zip(expected[:-1], expected[1:])):
        raise ValueError(f"{path}: layer shapes do not match the stored config")
    return Network(config, weights, biases), doc.get("metadata", {})


def with_input_dim(config: NetworkConfig, input_dim: int) -> NetworkConfig:
    return replace(config, input_dim=input_dim)
