"""Dense feed-forward binary classifiers and their flat parameter vectors.

A :class:`Network` is an ordered list of :class:`DenseLayer` objects ending in a
single output unit. Parameters are flattened layer by layer, each layer
contributing its row-major weight matrix followed by its biases. Every other
module addresses parameters through that canonical order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

#: Decision threshold; class 1 iff output >= THRESHOLD.
THRESHOLD = 0.5

ACTIVATIONS = ("relu", "identity", "sigmoid")

FORMAT_NAME = "robustcfx-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Raised for malformed or inconsistent model files and layer specs."""


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activate(z, activation: str):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    if activation == "sigmoid":
        return _sigmoid(z)
    raise ModelFormatError(f"unknown activation {activation!r}")


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        b = np.array(self.biases, dtype=np.float64, copy=True).reshape(-1)
        if w.ndim != 2:
            raise ModelFormatError(f"weights must be a matrix, got shape {w.shape}")
        if b.shape != (w.shape[0],):
            raise ModelFormatError(
                f"biases length {b.shape[0]} does not match {w.shape[0]} output rows"
            )
        if self.activation not in ACTIVATIONS:
            raise ModelFormatError(f"unknown activation {self.activation!r}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ModelFormatError("layer parameters must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def cols(self) -> int:
        return self.weights.shape[1]

    @property
    def n_params(self) -> int:
        return self.weights.size + self.biases.size


@dataclass(frozen=True)
class Network:
    """Immutable dense classifier ``R^input_dim -> R`` (pre-threshold output)."""

    layers: tuple[DenseLayer, ...]
    metadata: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelFormatError("a network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].cols != layers[i - 1].rows:
                raise ModelFormatError(
                    f"layer {i} expects {layers[i].cols} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].rows}"
                )
        if layers[-1].rows != 1:
            raise ModelFormatError("the final layer must have exactly one output")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def input_dim(self) -> int:
        return self.layers[0].cols

    @property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def param_slices(self) -> list[tuple[slice, slice]]:
        """(weight slice, bias slice) of every layer within the flat vector."""
        out, pos = [], 0
        for layer in self.layers:
            ws = slice(pos, pos + layer.weights.size)
            pos = ws.stop
            bs = slice(pos, pos + layer.biases.size)
            pos = bs.stop
            out.append((ws, bs))
        return out

    def bias_mask(self) -> np.ndarray:
        """Boolean vector, True at bias positions."""
        mask = np.zeros(self.n_params, dtype=bool)
        for _, bs in self.param_slices():
            mask[bs] = True
        return mask

    def flatten(self) -> np.ndarray:
        parts = []
        for layer in self.layers:
            parts.append(layer.weights.reshape(-1))
            parts.append(layer.biases)
        return np.concatenate(parts)

    def with_params(self, theta: Sequence[float]) -> "Network":
        """Same topology and activations, parameters taken from ``theta``."""
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {theta.size}")
        layers = []
        for layer, (ws, bs) in zip(self.layers, self.param_slices()):
            layers.append(
                DenseLayer(theta[ws].reshape(layer.rows, layer.cols), theta[bs], layer.activation)
            )
        return Network(tuple(layers), self.metadata)

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.input_dim,):
            raise ValueError(f"expected input of dimension {self.input_dim}, got shape {x.shape}")
        return x

    def forward(self, x) -> float:
        h = self._check_input(x).reshape(-1)
        for layer in self.layers:
            h = activate(layer.weights @ h + layer.biases, layer.activation)
        return float(h[0])

    def predict_output(self, X) -> np.ndarray:
        """Outputs for a batch of inputs, shape (m,)."""
        H = np.atleast_2d(self._check_input(X))
        for layer in self.layers:
            H = activate(H @ layer.weights.T + layer.biases, layer.activation)
        return H[:, 0]

    def decide(self, x) -> int:
        return int(self.forward(x) >= THRESHOLD)

    def forward_params(self, thetas, x) -> np.ndarray:
        """Outputs at one input for many parameter vectors ``thetas`` (n, k)."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        if thetas.shape[1] != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters per row, got {thetas.shape[1]}")
        n = thetas.shape[0]
        h = np.broadcast_to(self._check_input(x).reshape(-1), (n, self.input_dim))
        for layer, (ws, bs) in zip(self.layers, self.param_slices()):
            W = thetas[:, ws].reshape(n, layer.rows, layer.cols)
            h = activate(np.einsum("nrc,nc->nr", W, h) + thetas[:, bs], layer.activation)
        return h[:, 0]


def forward(net: Network, x) -> float:
    return net.forward(x)


def param_distance(a, b, p: float | str = np.inf) -> float:
    """``||a - b||_p`` for p in {1, 2, inf}."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if p in ("inf", "Inf", math.inf):
        p = np.inf
    if p not in (1, 2, np.inf):
        raise ValueError(f"unsupported norm order {p!r}")
    return float(np.linalg.norm(a - b, ord=p)) if a.size else 0.0


def dense_network(
    weights: Sequence[Sequence[Sequence[float]]],
    biases: Sequence[Sequence[float]] | None = None,
    activations: Sequence[str] | None = None,
    metadata: dict | None = None,
) -> Network:
    """Build a network from nested lists; hidden layers default to ReLU, output to identity."""
    n = len(weights)
    if biases is None:
        biases = [np.zeros(len(w)) for w in weights]
    if activations is None:
        activations = ["relu"] * (n - 1) + ["identity"]
    layers = tuple(DenseLayer(np.asarray(w, float), np.asarray(b, float), a)
                   for w, b, a in zip(weights, biases, activations))
    return Network(layers, metadata or {})


# -- serialization -----------------------------------------------------------

def _reject_constant(name):
    raise ModelFormatError(f"non-finite value {name} is not allowed in model files")


def network_to_dict(net: Network) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "layers": [
            {
                "rows": layer.rows,
                "cols": layer.cols,
                "activation": layer.activation,
                "weights": [float(v) for v in layer.weights.reshape(-1)],
                "biases": [float(v) for v in layer.biases],
            }
            for layer in net.layers
        ],
        "metadata": net.metadata,
    }


def _number_list(values, where: str, expected: int) -> np.ndarray:
    if not isinstance(values, list):
        raise ModelFormatError(f"{where}: expected a list of numbers")
    if len(values) != expected:
        raise ModelFormatError(f"{where}: expected {expected} values, got {len(values)}")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ModelFormatError(f"{where}[{i}]: expected a number, got {v!r}")
        if not math.isfinite(v):
            raise ModelFormatError(f"{where}[{i}]: non-finite value")
    return np.asarray(values, dtype=np.float64)


def network_from_dict(doc: dict) -> Network:
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ModelFormatError(f"format: expected {FORMAT_NAME!r}, got {doc.get('format')!r}")
    for key in ("input_dim", "layers"):
        if key not in doc:
            raise ModelFormatError(f"missing required field {key!r}")
    input_dim = doc["input_dim"]
    if isinstance(input_dim, bool) or not isinstance(input_dim, int) or input_dim < 1:
        raise ModelFormatError("input_dim: expected a positive integer")
    raw_layers = doc["layers"]
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ModelFormatError("layers: expected a non-empty list")
    layers = []
    for i, spec in enumerate(raw_layers):
        where = f"layers[{i}]"
        if not isinstance(spec, dict):
            raise ModelFormatError(f"{where}: expected an object")
        try:
            rows, cols = int(spec["rows"]), int(spec["cols"])
            act = spec.get("activation", "relu")
            w = _number_list(spec["weights"], f"{where}.weights", rows * cols)
            b = _number_list(spec.get("biases", [0.0] * rows), f"{where}.biases", rows)
        except KeyError as exc:
            raise ModelFormatError(f"{where}: missing field {exc.args[0]!r}") from None
        if act not in ACTIVATIONS:
            raise ModelFormatError(f"{where}.activation: unknown activation {act!r}")
        layers.append(DenseLayer(w.reshape(rows, cols), b, act))
    if layers[0].cols != input_dim:
        raise ModelFormatError(
            f"layers[0].cols = {layers[0].cols} does not match input_dim = {input_dim}"
        )
    meta = doc.get("metadata") or {}
    if not isinstance(meta, dict):
        raise ModelFormatError("metadata: expected an object")
    return Network(tuple(layers), meta)


def save_model(net: Network, path) -> None:
    # json emits shortest round-trip reprs, so float64 values survive exactly.
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")


def loads_model(text: str) -> Network:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return network_from_dict(doc)


def load_model(path) -> Network:
    return loads_model(Path(path).read_text())
