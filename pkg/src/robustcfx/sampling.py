"""Plausible model shifts: the parameter box and uniform realizations drawn from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .network import THRESHOLD, Network

#: Rows generated per chunk when streaming realizations.
CHUNK = 1 << 15


@dataclass(frozen=True)
class ShiftSpec:
    """Box of half-width ``delta`` (infinity norm) around the masked parameters."""

    delta: float
    mask: np.ndarray

    def __post_init__(self):
        delta = float(self.delta)
        if not np.isfinite(delta) or delta < 0:
            raise ValueError(f"delta must be a finite non-negative number, got {self.delta!r}")
        mask = np.array(self.mask, dtype=bool, copy=True).reshape(-1)
        mask.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "mask", mask)

    norm = "inf"

    @classmethod
    def for_network(cls, net: Network, delta: float, perturb_biases: bool | None = None,
                    mask=None) -> "ShiftSpec":
        """Shift over ``net``'s parameters.

        Biases are perturbed unless ``perturb_biases`` is False or the network's
        metadata says ``"perturb_biases": false``. An explicit ``mask`` wins.
        """
        if mask is None:
            mask = default_mask(net, perturb_biases)
        mask = np.asarray(mask, dtype=bool)
        if mask.size != net.n_params:
            raise ValueError(f"mask has {mask.size} entries, network has {net.n_params} parameters")
        return cls(delta, mask)

    def box(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = np.asarray(theta, dtype=np.float64)
        self._check(theta)
        d = np.where(self.mask, self.delta, 0.0)
        return theta - d, theta + d

    def with_delta(self, delta: float) -> "ShiftSpec":
        return ShiftSpec(delta, self.mask)

    def _check(self, theta):
        if theta.shape[-1] != self.mask.size:
            raise ValueError(f"parameter vector has {theta.shape[-1]} entries, mask has {self.mask.size}")


def default_mask(net: Network, perturb_biases: bool | None = None) -> np.ndarray:
    """Explicit ``perturb_biases`` first, then a ``shift_mask`` or ``perturb_biases``
    entry in the metadata, else every parameter."""
    if perturb_biases is None and "shift_mask" in net.metadata:
        mask = np.asarray(net.metadata["shift_mask"], dtype=bool)
        if mask.shape != (net.n_params,):
            raise ValueError("metadata shift_mask must have one entry per parameter")
        return mask
    if perturb_biases is None:
        perturb_biases = bool(net.metadata.get("perturb_biases", True))
    if perturb_biases:
        return np.ones(net.n_params, dtype=bool)
    return ~net.bias_mask()


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream)``.

    Distinct streams are statistically independent, so each call site of a
    search can draw its own batch without depending on call order elsewhere.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & ((1 << 64) - 1), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def sample_realization(theta, shift: ShiftSpec, rng: np.random.Generator) -> np.ndarray:
    """One parameter vector drawn uniformly from the shift box around ``theta``."""
    return sample_realizations(theta, shift, 1, rng)[0]


def sample_realizations(theta, shift: ShiftSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    shift._check(theta)
    out = np.broadcast_to(theta, (n, theta.size)).copy()
    idx = np.flatnonzero(shift.mask)
    if idx.size and shift.delta > 0:
        out[:, idx] += rng.uniform(-shift.delta, shift.delta, size=(n, idx.size))
    return out


@dataclass(frozen=True)
class SampleBatch:
    """Reproducible lazy batch of ``n`` realizations.

    Row ``i`` is always the ``i``-th row of the ``(seed, stream)`` stream, so the
    same arguments always give the same realizations, chunked or not.
    """

    net: Network
    shift: ShiftSpec
    n: int
    seed: int
    stream: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")

    def __iter__(self) -> Iterator[np.ndarray]:
        rng = stream_rng(self.seed, self.stream)
        theta = self.net.flatten()
        left = int(self.n)
        while left > 0:
            m = min(left, CHUNK)
            yield sample_realizations(theta, self.shift, m, rng)
            left -= m

    def outputs(self, x) -> np.ndarray:
        parts = [self.net.forward_params(chunk, x) for chunk in self]
        out = np.concatenate(parts)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("network produced a non-finite output on a realization")
        return out


def count_failures(net: Network, x, shift: ShiftSpec, n: int, seed: int, stream: int = 0) -> int:
    """Number of the ``n`` realizations classifying ``x`` as 0."""
    return int(np.count_nonzero(SampleBatch(net, shift, n, seed, stream).outputs(x) < THRESHOLD))


def realizations(net: Network, x, delta: float, n: int, seed: int = 0, *,
                 mask=None, stream: int = 0) -> float:
    """Fraction of ``n`` sampled realizations that still classify ``x`` as 1."""
    shift = ShiftSpec.for_network(net, delta, mask=mask)
    return 1.0 - count_failures(net, x, shift, n, seed, stream) / n


def min_max_outputs(net: Network, x, delta: float, n: int, seed: int = 0, *,
                    mask=None, stream: int = 0) -> tuple[float, float]:
    """Sampled under-approximation of the reachable output range."""
    out = SampleBatch(net, ShiftSpec.for_network(net, delta, mask=mask), n, seed, stream).outputs(x)
    return float(out.min()), float(out.max())
