"""Robust counterfactual generation: find a candidate, certify it by sampling,
and widen the distance budget until a candidate passes.

Candidates come from a lightweight search rather than an exact optimizer: walk
from ``x`` toward the nearest training point classified 1 until the budget runs
out, then pull coordinates back toward ``x`` while the output stays at or above
the level reached. Larger budgets therefore give deeper, more robust points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .apds import check_robust_at
from .network import THRESHOLD, Network

MARGIN = 0.01
RELAXATION = 1.1
TAU = 50
BUDGET_SLACK = 1.05
NO_ROBUST_CFX = "no robust CFX can be found"
_STEPS = (1.0, 0.5, 0.25, 0.125, 0.0625)


def _l1(a, b) -> float:
    return float(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)).sum())


def nearest_anchor(net: Network, x, data, margin: float = MARGIN) -> np.ndarray:
    """Closest (l1) data row classified 1 with output at least ``0.5 + margin``."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValueError("dataset is empty")
    pos = data[net.predict_output(data) >= THRESHOLD + margin]
    if pos.shape[0] == 0:
        raise ValueError("no positively-classified anchor available in the dataset")
    return pos[np.argmin(np.abs(pos - x).sum(axis=1))]


def boundary_fraction(net: Network, x, anchor, level: float, iters: int = 60) -> float:
    """Smallest t (to bisection precision) on the segment x + t(anchor - x) with output >= level.

    Assumes the anchor reaches ``level`` and ``x`` does not.
    """
    lo, hi = 0.0, 1.0
    d = anchor - x
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if net.forward(x + mid * d) >= level:
            hi = mid
        else:
            lo = mid
    return hi


def boundary_distance(net: Network, x, data, margin: float = MARGIN) -> float:
    """l1 distance from x to where the segment toward its anchor reaches ``0.5 + margin``."""
    x = np.asarray(x, dtype=np.float64)
    a = nearest_anchor(net, x, data, margin)
    return boundary_fraction(net, x, a, THRESHOLD + margin) * _l1(x, a)


def _shrink(net: Network, x, start, level: float, bounds) -> np.ndarray:
    """Greedy coordinate moves toward x that keep the output >= level."""
    cur = start.copy()
    d = x.size
    for _ in range(50 * d):
        gap = x - cur
        if not np.any(gap):
            break
        steps = np.asarray(_STEPS)
        cand = np.repeat(cur[None], d * steps.size, axis=0)
        rows = np.arange(cand.shape[0])
        cols = np.tile(np.arange(d), steps.size)
        cand[rows, cols] += np.repeat(steps, d) * gap[cols]
        if bounds is not None:
            np.clip(cand, bounds[0], bounds[1], out=cand)
        gain = np.abs(cur - x).sum() - np.abs(cand - x).sum(axis=1)
        ok = (net.predict_output(cand) >= level) & (gain > 1e-12)
        if not ok.any():
            break
        cur = cand[np.flatnonzero(ok)[np.argmax(gain[ok])]]
    return cur


def compute_cfx(net: Network, x, dataset, budget: float, *, margin: float = MARGIN,
                bounds=None, refine: bool = True) -> np.ndarray | None:
    """A point classified 1 within l1 distance ``budget`` of x, or None at this budget.

    Below the distance to the nearest anchor the start point is on the segment
    toward that anchor. Beyond it, every anchor's segment is cut at the budget
    and the point with the highest output wins. ``refine`` enables the greedy
    pull-back toward x. ``bounds`` is an optional (lo, hi) pair of feature limits.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if net.forward(x) >= THRESHOLD:
        return x.copy()
    data = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    a = nearest_anchor(net, x, data, margin)
    dist = _l1(x, a)
    if budget < dist:
        p = x + (budget / dist) * (a - x)
    else:
        pos = data[net.predict_output(data) >= THRESHOLD + margin]
        d = np.abs(pos - x).sum(axis=1)
        pts = x + np.minimum(1.0, budget / d)[:, None] * (pos - x)
        p = pts[np.argmax(net.predict_output(pts))]
    level = net.forward(p)
    if level < THRESHOLD + margin:
        t0 = boundary_fraction(net, x, a, THRESHOLD + margin)
        if t0 * dist > budget:
            return None
        p, level = x + t0 * (a - x), THRESHOLD + margin
    out = _shrink(net, x, p, level, bounds) if refine else p
    return out if net.forward(out) >= THRESHOLD else None


@dataclass(frozen=True)
class CfxRequest:
    x: np.ndarray
    delta: float
    alpha: float = 0.999
    R: float = 0.995
    seed: int = 0
    metric: str = "l1"
    initial_budget: float | None = None  # default: boundary distance * 1.05
    relaxation: float = RELAXATION
    tau: int = TAU
    margin: float = MARGIN
    mask: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.float64).reshape(-1))
        if self.metric != "l1":
            raise ValueError(f"unsupported distance metric {self.metric!r}")
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if not self.relaxation > 1:
            raise ValueError("relaxation factor must exceed 1")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.initial_budget is not None and not self.initial_budget > 0:
            raise ValueError("initial budget must be positive")


@dataclass
class CfxResult:
    x_prime: np.ndarray | None
    valid: bool
    robust: bool
    distance_l1: float
    iterations_used: int
    budgets: list[float] = field(default_factory=list)
    reason: str | None = None

    def as_dict(self) -> dict:
        return {
            "x_prime": None if self.x_prime is None else self.x_prime.tolist(),
            "valid": self.valid, "robust": self.robust, "distance_l1": self.distance_l1,
            "iterations_used": self.iterations_used, "reason": self.reason,
        }


def generate_robust_cfx(req: CfxRequest, net: Network, dataset, *, bounds=None) -> CfxResult:
    """Iterative relaxation: return the first candidate whose sampled robustness test passes.

    ``dataset`` is a matrix of feature rows in the network's input space.
    """
    x = req.x
    if net.forward(x) >= THRESHOLD:
        raise ValueError("input is already classified 1; a counterfactual request is vacuous")
    data = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    budget = req.initial_budget
    if budget is None:
        budget = BUDGET_SLACK * boundary_distance(net, x, data, req.margin)
    budgets, last = [], None
    for t in range(req.tau):
        budgets.append(budget)
        cand = compute_cfx(net, x, data, budget, margin=req.margin, bounds=bounds)
        if cand is not None:
            last = cand
            if req.delta == 0 or check_robust_at(net, cand, req.delta, req.alpha, req.R, req.seed,
                                                 mask=req.mask, stream=t):
                return CfxResult(cand, True, True, _l1(x, cand), t + 1, budgets)
        budget *= req.relaxation
    return CfxResult(last, last is not None, False,
                     _l1(x, last) if last is not None else float("nan"), req.tau, budgets,
                     NO_ROBUST_CFX)


class RobustCounterfactualExplainer(TransformerMixin, BaseEstimator):
    """Maps each input row classified 0 to a robust counterfactual.

    ``fit`` records the anchor data and feature bounds. ``transform`` returns
    counterfactual rows, NaN where none was found; ``explain`` returns the full
    results. Row i uses the seed stream ``(seed, i)``.
    """

    def __init__(self, network: Network, delta: float = 0.02, alpha: float = 0.999,
                 R: float = 0.995, tau: int = TAU, relaxation: float = RELAXATION,
                 margin: float = MARGIN, clamp: bool = True, seed: int = 0):
        self.network = network
        self.delta = delta
        self.alpha = alpha
        self.R = R
        self.tau = tau
        self.relaxation = relaxation
        self.margin = margin
        self.clamp = clamp
        self.seed = seed

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        nearest_anchor(self.network, X[0], X, self.margin)  # fail early without anchors
        self.anchors_ = X
        self.bounds_ = (X.min(axis=0), X.max(axis=0)) if self.clamp else None
        self.n_features_in_ = X.shape[1]
        return self

    def _row_seed(self, i: int) -> int:
        return int(np.random.SeedSequence(self.seed, spawn_key=(i,)).generate_state(1)[0])

    def explain(self, X) -> list[CfxResult]:
        check_is_fitted(self, "anchors_")
        X = check_array(X, dtype=np.float64)
        base = CfxRequest(X[0], self.delta, self.alpha, self.R, self.seed,
                          relaxation=self.relaxation, tau=self.tau, margin=self.margin)
        return [generate_robust_cfx(replace(base, x=row, seed=self._row_seed(i)), self.network,
                                    self.anchors_, bounds=self.bounds_)
                for i, row in enumerate(X)]

    def transform(self, X):
        out = [r.x_prime if r.robust else np.full(self.n_features_in_, np.nan)
               for r in self.explain(X)]
        return np.vstack(out)
