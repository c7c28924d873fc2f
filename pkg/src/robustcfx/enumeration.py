"""Exact accounting of the shift box by recursive interval splitting.

Each branch is a sub-box of the shift box. Interval propagation either decides
it (robust: lower bound >= 0.5, non-robust: upper bound < 0.5) or the widest
parameter interval is halved and both halves go back on a LIFO stack. Volumes
are tracked relative to the root box, so the three fractions always sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .apds import DELTA_INIT, MAX_DOUBLINGS, shift_search
from .intervals import Verdict, propagate_boxes
from .network import THRESHOLD, Network
from .sampling import ShiftSpec, sample_realizations, stream_rng

MAX_DEPTH = 24
MAX_LEAVES = 1_000_000
BATCH = 8192


@dataclass(frozen=True)
class Branch:
    lo: np.ndarray
    hi: np.ndarray
    depth: int
    verdict: Verdict

    @property
    def relative_volume(self) -> float:
        return float(np.ldexp(1.0, -self.depth))


@dataclass
class EnumerationReport:
    robust_fraction: float
    nonrobust_fraction: float
    unknown_fraction: float
    leaves: dict[str, int]
    depth_reached: int
    budget_exhausted: bool
    delta: float
    branches: list[Branch] = field(default_factory=list, repr=False)

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "robust_fraction": self.robust_fraction,
            "nonrobust_fraction": self.nonrobust_fraction,
            "unknown_fraction": self.unknown_fraction,
            "leaves_robust": self.leaves["robust"],
            "leaves_nonrobust": self.leaves["non-robust"],
            "leaves_unknown": self.leaves["unknown"],
            "depth_reached": self.depth_reached,
            "budget_exhausted": self.budget_exhausted,
        }


def enumerate_shifts(net: Network, x, delta: float, *, max_depth: int = MAX_DEPTH,
                     max_leaves: int = MAX_LEAVES, mask=None, keep_branches: bool = False,
                     stop_on_nonrobust: bool = False) -> EnumerationReport:
    """Split the ``delta`` shift box until every branch is decided or the budget runs out.

    ``max_depth`` caps the number of splits along any one lineage and
    ``max_leaves`` caps the number of finished branches; hitting either sets
    ``budget_exhausted``. Undecided volume is reported as unknown.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    lo0, hi0 = ShiftSpec.for_network(net, delta, mask=mask).box(net.flatten())

    stack = [(lo0[None], hi0[None], np.zeros(1, dtype=np.int64))]
    vol = {Verdict.ROBUST: 0.0, Verdict.NON_ROBUST: 0.0, Verdict.UNKNOWN: 0.0}
    count = {Verdict.ROBUST: 0, Verdict.NON_ROBUST: 0, Verdict.UNKNOWN: 0}
    branches: list[Branch] = []
    depth_reached = 0
    exhausted = False

    def record(verdict, lo, hi, depth):
        if not depth.size:
            return
        vol[verdict] += float(np.ldexp(1.0, -depth).sum())
        count[verdict] += int(depth.size)
        if keep_branches:
            branches.extend(Branch(a, b, int(d), verdict) for a, b, d in zip(lo, hi, depth))

    while stack:
        lo, hi, depth = stack.pop()
        if lo.shape[0] > BATCH:
            stack.append((lo[:-BATCH], hi[:-BATCH], depth[:-BATCH]))
            lo, hi, depth = lo[-BATCH:], hi[-BATCH:], depth[-BATCH:]
        depth_reached = max(depth_reached, int(depth.max()))
        out_lo, out_hi = propagate_boxes(net, lo, hi, x)
        robust = out_lo >= THRESHOLD
        nonrobust = ~robust & (out_hi < THRESHOLD)
        undecided = ~(robust | nonrobust)
        width = hi - lo
        capped = undecided & ((depth >= max_depth) | (width.max(axis=1) <= 0))
        split = undecided & ~capped

        record(Verdict.ROBUST, lo[robust], hi[robust], depth[robust])
        record(Verdict.NON_ROBUST, lo[nonrobust], hi[nonrobust], depth[nonrobust])
        record(Verdict.UNKNOWN, lo[capped], hi[capped], depth[capped])
        if capped.any():
            exhausted = True
        if stop_on_nonrobust and nonrobust.any():
            break
        if split.any():
            s_lo, s_hi, s_d = lo[split], hi[split], depth[split]
            j = np.argmax(s_hi - s_lo, axis=1)  # first index wins ties
            rows = np.arange(j.size)
            mid = 0.5 * (s_lo[rows, j] + s_hi[rows, j])
            left_hi = s_hi.copy()
            left_hi[rows, j] = mid
            right_lo = s_lo.copy()
            right_lo[rows, j] = mid
            stack.append((np.concatenate([s_lo, right_lo]), np.concatenate([left_hi, s_hi]),
                          np.concatenate([s_d, s_d]) + 1))
        if sum(count.values()) >= max_leaves and stack:
            exhausted = True
            break

    for lo, hi, depth in stack:  # budget ran out: the rest is unknown
        record(Verdict.UNKNOWN, lo, hi, depth)

    return EnumerationReport(
        robust_fraction=vol[Verdict.ROBUST],
        nonrobust_fraction=vol[Verdict.NON_ROBUST],
        unknown_fraction=vol[Verdict.UNKNOWN],
        leaves={str(v): c for v, c in count.items()},
        depth_reached=depth_reached,
        budget_exhausted=exhausted,
        delta=float(delta),
        branches=branches,
    )


def decide_robust(net: Network, x, delta: float, *, max_depth: int = MAX_DEPTH,
                  max_leaves: int = MAX_LEAVES, mask=None, seed: int = 0,
                  n_probe: int = 1000) -> Verdict:
    """Worst-case robustness of ``x`` over the whole ``delta`` box.

    A cheap random probe for a counterexample runs first; enumeration then
    either proves robustness, finds a non-robust branch, or gives up (unknown).
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if net.forward(x) < THRESHOLD:
        return Verdict.NON_ROBUST
    if delta == 0:
        return Verdict.ROBUST
    shift = ShiftSpec.for_network(net, delta, mask=mask)
    if n_probe:
        probe = sample_realizations(net.flatten(), shift, n_probe, stream_rng(seed, 0))
        if np.any(net.forward_params(probe, x) < THRESHOLD):
            return Verdict.NON_ROBUST
    rep = enumerate_shifts(net, x, delta, max_depth=max_depth, max_leaves=max_leaves,
                           mask=shift.mask, stop_on_nonrobust=True)
    if rep.nonrobust_fraction > 0:
        return Verdict.NON_ROBUST
    if rep.unknown_fraction > 0:
        return Verdict.UNKNOWN
    return Verdict.ROBUST


def provable_delta(net: Network, x, *, max_depth: int = MAX_DEPTH, max_leaves: int = MAX_LEAVES,
                   mask=None, seed: int = 0, delta_init: float = DELTA_INIT,
                   max_doublings: int = MAX_DOUBLINGS) -> float:
    """Largest shift proven robust for every realization; unknown counts as failure."""
    if net.forward(x) < THRESHOLD:
        return 0.0

    def is_robust(delta: float) -> bool:
        v = decide_robust(net, x, delta, max_depth=max_depth, max_leaves=max_leaves,
                          mask=mask, seed=seed)
        return v is Verdict.ROBUST

    return shift_search(is_robust, delta_init, max_doublings)
