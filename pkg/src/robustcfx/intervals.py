"""Interval arithmetic and interval networks over a shift box.

Propagation uses plain float arithmetic with no outward rounding, so bounds can
be off by about one ulp; callers compare against the threshold directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .network import THRESHOLD, Network, _sigmoid
from .sampling import ShiftSpec


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("interval endpoints must be finite")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, v: float) -> "Interval":
        return cls(v, v)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, v) -> bool:
        if isinstance(v, Interval):
            return self.lo <= v.lo and v.hi <= self.hi
        return self.lo <= v <= self.hi

    def _coerce(self, other) -> "Interval":
        return other if isinstance(other, Interval) else Interval.point(other)

    def __add__(self, other):
        other = self._coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval(min(p), max(p))

    __rmul__ = __mul__

    def relu(self) -> "Interval":
        return Interval(max(self.lo, 0.0), max(self.hi, 0.0))

    def sigmoid(self) -> "Interval":
        return Interval(float(_sigmoid(self.lo)), float(_sigmoid(self.hi)))

    def split(self) -> tuple["Interval", "Interval"]:
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)

    def __repr__(self):
        return f"[{self.lo:.6g}, {self.hi:.6g}]"


class Verdict(enum.Enum):
    ROBUST = "robust"
    NON_ROBUST = "non-robust"
    UNKNOWN = "unknown"

    def __str__(self):
        return self.value


def classify_bounds(lo: float, hi: float) -> Verdict:
    if lo >= THRESHOLD:
        return Verdict.ROBUST
    if hi < THRESHOLD:
        return Verdict.NON_ROBUST
    return Verdict.UNKNOWN


@dataclass(frozen=True)
class IntervalNetwork:
    """A network whose flat parameters range over ``[lo, hi]`` coordinate-wise."""

    net: Network
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).reshape(-1)
        hi = np.array(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != (self.net.n_params,) or hi.shape != lo.shape:
            raise ValueError("interval bounds must cover every network parameter")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("every parameter interval must be finite and non-empty")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def param(self, i: int) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    def weight_intervals(self, layer: int) -> list[list[Interval]]:
        ws, _ = self.net.param_slices()[layer]
        L = self.net.layers[layer]
        lo = self.lo[ws].reshape(L.rows, L.cols)
        hi = self.hi[ws].reshape(L.rows, L.cols)
        return [[Interval(lo[r, c], hi[r, c]) for c in range(L.cols)] for r in range(L.rows)]

    def bias_intervals(self, layer: int) -> list[Interval]:
        _, bs = self.net.param_slices()[layer]
        return [Interval(a, b) for a, b in zip(self.lo[bs], self.hi[bs])]

    def contains(self, theta) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        return bool(np.all(self.lo <= theta) and np.all(theta <= self.hi))


def abstract(net: Network, shift: ShiftSpec) -> IntervalNetwork:
    lo, hi = shift.box(net.flatten())
    return IntervalNetwork(net, lo, hi)


def _activate_bounds(lo, hi, activation):
    if activation == "relu":
        return np.maximum(lo, 0.0), np.maximum(hi, 0.0)
    if activation == "sigmoid":
        return _sigmoid(lo), _sigmoid(hi)
    return lo, hi


def propagate_boxes(net: Network, lo, hi, x) -> tuple[np.ndarray, np.ndarray]:
    """Output bounds for a batch of parameter boxes ``lo``/``hi`` of shape (B, k)."""
    lo = np.atleast_2d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_2d(np.asarray(hi, dtype=np.float64))
    B = lo.shape[0]
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != net.input_dim:
        raise ValueError(f"expected input of dimension {net.input_dim}, got {x.size}")
    h_lo = np.broadcast_to(x, (B, x.size))
    h_hi = h_lo
    for layer, (ws, bs) in zip(net.layers, net.param_slices()):
        shape = (B, layer.rows, layer.cols)
        w_lo, w_hi = lo[:, ws].reshape(shape), hi[:, ws].reshape(shape)
        a, b = h_lo[:, None, :], h_hi[:, None, :]
        p1, p2, p3, p4 = w_lo * a, w_lo * b, w_hi * a, w_hi * b
        z_lo = np.minimum(np.minimum(p1, p2), np.minimum(p3, p4)).sum(axis=2) + lo[:, bs]
        z_hi = np.maximum(np.maximum(p1, p2), np.maximum(p3, p4)).sum(axis=2) + hi[:, bs]
        h_lo, h_hi = _activate_bounds(z_lo, z_hi, layer.activation)
    return h_lo[:, 0], h_hi[:, 0]


def propagate(inn: IntervalNetwork, x) -> Interval:
    """Sound (up to rounding) enclosure of every realization's output at ``x``."""
    lo, hi = propagate_boxes(inn.net, inn.lo[None], inn.hi[None], x)
    return Interval(lo[0], hi[0])


def verdict(inn: IntervalNetwork, x) -> Verdict:
    out = propagate(inn, x)
    return classify_bounds(out.lo, out.hi)
