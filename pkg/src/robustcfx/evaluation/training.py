"""Mini-batch gradient-descent trainer for small ReLU classifiers with sigmoid output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..network import THRESHOLD, DenseLayer, Network
from .data import Dataset


class TrainingDivergedError(FloatingPointError):
    """Loss or parameters became non-finite during training."""


def init_network(input_dim: int, hidden: tuple[int, ...], seed: int) -> Network:
    """He-normal weights and zero biases; the only source of randomness besides batch order."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    dims = (input_dim, *hidden, 1)
    layers = []
    for i in range(len(dims) - 1):
        w = rng.normal(0.0, np.sqrt(2.0 / dims[i]), size=(dims[i + 1], dims[i]))
        layers.append(DenseLayer(w, np.zeros(dims[i + 1]),
                                 "relu" if i < len(dims) - 2 else "sigmoid"))
    return Network(tuple(layers))


def _logits(Ws, bs, X):
    acts = [X]
    h = X
    for i, (W, b) in enumerate(zip(Ws, bs)):
        z = h @ W.T + b
        h = np.maximum(z, 0.0) if i < len(Ws) - 1 else z
        acts.append(h)
    return acts


def _bce_with_logits(z, y):
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class NetworkClassifier(ClassifierMixin, BaseEstimator):
    """Feed-forward ReLU classifier trained with plain mini-batch gradient descent.

    The fitted model is exposed as ``network_`` (sigmoid output layer), which is
    what the certification code consumes. Labels must be 0/1.
    """

    def __init__(self, hidden_layer_sizes=(20, 10), epochs: int = 200, learning_rate: float = 0.1,
                 batch_size: int = 32, seed: int = 0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if self.epochs < 0 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and learning_rate > 0 are required")
        y = y.astype(np.float64)
        hidden = tuple(int(h) for h in self.hidden_layer_sizes)
        init = init_network(X.shape[1], hidden, self.seed)
        Ws = [L.weights.copy() for L in init.layers]
        bs = [L.biases.copy() for L in init.layers]
        order_rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(1,)))
        losses = []
        m = X.shape[0]
        for _ in range(self.epochs):
            perm = order_rng.permutation(m)
            for start in range(0, m, self.batch_size):
                idx = perm[start:start + self.batch_size]
                acts = _logits(Ws, bs, X[idx])
                # d(loss)/d(logit) for sigmoid + binary cross-entropy
                g = (1.0 / (1.0 + np.exp(-acts[-1][:, 0])) - y[idx])[:, None] / idx.size
                for i in range(len(Ws) - 1, -1, -1):
                    gW, gb = g.T @ acts[i], g.sum(axis=0)
                    if i:
                        g = (g @ Ws[i]) * (acts[i] > 0)
                    Ws[i] -= self.learning_rate * gW
                    bs[i] -= self.learning_rate * gb
            loss = _bce_with_logits(_logits(Ws, bs, X)[-1][:, 0], y)
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite at epoch {len(losses) + 1}")
            losses.append(loss)
        self.network_ = Network(tuple(DenseLayer(W, b, L.activation)
                                      for W, b, L in zip(Ws, bs, init.layers)))
        self.loss_curve_ = losses
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        self.training_accuracy_ = float(np.mean(self.predict(X) == y))
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        p = self.network_.predict_output(check_array(X, dtype=np.float64))
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= THRESHOLD).astype(int)


@dataclass
class TrainResult:
    network: Network
    training_accuracy: float
    loss_curve: list[float]


def train(dataset: Dataset, arch: tuple[int, ...] = (20, 10), hyperparams: dict | None = None,
          seed: int = 0) -> TrainResult:
    """Fit on the dataset's normalized features; the normalization travels in the model metadata."""
    clf = NetworkClassifier(hidden_layer_sizes=arch, seed=seed, **(hyperparams or {}))
    clf.fit(dataset.Xn, dataset.y)
    net = Network(clf.network_.layers, {
        "name": "trained", "architecture": list(arch), "seed": seed,
        "normalization": dataset.normalization(), "training_accuracy": clf.training_accuracy_,
    })
    return TrainResult(net, clf.training_accuracy_, clf.loss_curve_)


def shift_protocol(d1: Dataset, d2: Dataset, arch=(20, 10), hyperparams: dict | None = None,
                   seed: int = 0) -> tuple[TrainResult, TrainResult]:
    """Base model on D1, shifted model on D1 and D2 together, both from the same seeded init."""
    both = Dataset(np.vstack([d1.X, d2.X]), np.concatenate([d1.y, d2.y]),
                   d1.feature_names, d1.lo, d1.hi)
    return train(d1, arch, hyperparams, seed), train(both, arch, hyperparams, seed)
