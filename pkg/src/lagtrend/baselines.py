"""Comparison baselines: shuffled and one-class mocks, best-of, linear SVC."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .stats import accuracy


@dataclass(frozen=True)
class BaselineSet:
    shuffled: np.ndarray
    all_down: np.ndarray
    all_up: np.ndarray
    shuffled_accuracy: float
    all_down_accuracy: float
    all_up_accuracy: float

    @property
    def best_of(self) -> float:
        return best_of((self.shuffled_accuracy, self.all_down_accuracy, self.all_up_accuracy))


def shuffled_mock(predictions, seed: int | np.random.Generator = 0) -> np.ndarray:
    """A seeded permutation of the model's own predictions."""
    pred = np.asarray(predictions)
    if pred.size == 0:
        raise ValueError("cannot shuffle an empty prediction vector")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return pred[rng.permutation(pred.size)]


def one_class_mocks(length: int) -> tuple[np.ndarray, np.ndarray]:
    if length < 1:
        raise ValueError("length must be >= 1")
    return np.zeros(length, dtype=np.int64), np.ones(length, dtype=np.int64)


def best_of(accuracies) -> float:
    return float(max(accuracies))


def compute_baselines(predictions, targets, seed: int | np.random.Generator = 0) -> BaselineSet:
    targets = np.asarray(targets)
    shuffled = shuffled_mock(predictions, seed)
    down, up = one_class_mocks(targets.size)
    return BaselineSet(
        shuffled=shuffled,
        all_down=down,
        all_up=up,
        shuffled_accuracy=accuracy(shuffled, targets),
        all_down_accuracy=accuracy(down, targets),
        all_up_accuracy=accuracy(up, targets),
    )


@dataclass(frozen=True)
class SVCConfig:
    l2: float = 1e-4
    epochs: int = 100
    step: float = 0.01
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.l2 < 0 or self.step <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"invalid SVC hyperparameters: {self}")


@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    bias: float
    config: SVCConfig

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "config": asdict(self.config)}


def decision_function(classifier: LinearClassifier, rows) -> np.ndarray:
    return np.atleast_2d(rows) @ classifier.weights + classifier.bias


def predict_linear(classifier: LinearClassifier, rows) -> np.ndarray:
    """Positive margin means UP (1); zero or negative means DOWN (0)."""
    return (decision_function(classifier, rows) > 0).astype(np.int64)


def train_linear_svc(rows, classes, config: SVCConfig = SVCConfig()) -> LinearClassifier:
    """Hinge loss + ``l2/2 * |w|^2`` by seeded mini-batch subgradient descent.

    ``classes`` are 0/1 indices (or one-hot rows); the bias is not penalised.
    """
    x = np.asarray(rows, dtype=np.float64)
    c = np.asarray(classes)
    if c.ndim == 2:
        c = c[:, 1]
    if x.shape[0] == 0:
        raise ValueError("empty training set")
    y = np.where(c.astype(np.int64) == 1, 1.0, -1.0)
    rng = np.random.default_rng(config.seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            active = yb * (xb @ w + b) < 1.0
            gw = config.l2 * w - (yb[active, None] * xb[active]).sum(axis=0) / idx.size
            gb = -yb[active].sum() / idx.size
            w -= config.step * gw
            b -= config.step * gb
    return LinearClassifier(w, float(b), config)
