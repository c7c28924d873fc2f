"""Small reference networks and random-network generators used in experiments and tests."""

from __future__ import annotations

import numpy as np

from .network import THRESHOLD, DenseLayer, Network, dense_network

# Weights-only nets: biases exist in the parameter vector but are never shifted.
_WEIGHTS_ONLY = {"perturb_biases": False}


def two_relu_network() -> Network:
    """2-input, 2-ReLU, identity-output net used for the NOMS/PMS separation.

    y = 1 * relu(1*x1 + 0*x2) - 1 * relu(0*x1 + 0.6*x2)
    """
    return dense_network(
        [[[1.0, 0.0], [0.0, 0.6]], [[1.0, -1.0]]],
        metadata={"name": "two-relu", **_WEIGHTS_ONLY},
    )


TWO_RELU_CFX = np.array([1.0, 0.8])
TWO_RELU_QUERY = np.array([0.9, 0.9])


def enumeration_network() -> Network:
    """1-input, 2-ReLU net whose delta=0.115 box has edges
    [-0.48,-0.25], [-0.99,-0.76], [-1.14,-0.91], [0.69,0.93]."""
    return dense_network(
        [[[-0.365], [-0.875]], [[-1.025, 0.81]]],
        metadata={"name": "enumeration-example", **_WEIGHTS_ONLY},
    )


ENUMERATION_CFX = np.array([-2.57])


def linear_network(w: float = 1.0) -> Network:
    """y = w * x with an identity output; robust at x=1 exactly up to delta = w - 0.5."""
    return dense_network([[[w]]], metadata={"name": "linear", **_WEIGHTS_ONLY})


def random_network(rng: np.random.Generator, input_dim: int, hidden: tuple[int, ...],
                   *, biases: bool = False, scale: float = 1.0) -> Network:
    """Random ReLU net with identity output; weights ~ N(0, scale^2 / fan_in)."""
    dims = (input_dim, *hidden, 1)
    layers = []
    for i in range(len(dims) - 1):
        w = rng.normal(0.0, scale / np.sqrt(dims[i]), size=(dims[i + 1], dims[i]))
        b = rng.normal(0.0, 0.1, size=dims[i + 1]) if biases else np.zeros(dims[i + 1])
        layers.append(DenseLayer(w, b, "relu" if i < len(dims) - 2 else "identity"))
    meta = {"name": f"random-{input_dim}-{'-'.join(map(str, hidden))}"}
    if not biases:
        meta.update(_WEIGHTS_ONLY)
    return Network(tuple(layers), meta)


def find_valid_input(net: Network, rng: np.random.Generator, *, margin: float = 0.0,
                     tries: int = 10_000, scale: float = 2.0) -> np.ndarray | None:
    """Random input classified as 1 with output at least ``THRESHOLD + margin``."""
    X = rng.uniform(-scale, scale, size=(tries, net.input_dim))
    ok = np.flatnonzero(net.predict_output(X) >= THRESHOLD + margin)
    return X[ok[0]] if ok.size else None
