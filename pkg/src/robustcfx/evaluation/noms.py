"""Empirical test of the expectation-preservation property under uniform parameter shifts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..network import Network
from ..sampling import SampleBatch, ShiftSpec

ALTERNATIVES = ("auto", "two-sided", "greater", "less")


@dataclass
class MeanTest:
    mean: float
    reference: float
    std: float
    n: int
    pvalue: float
    alternative: str

    @property
    def diff(self) -> float:
        return self.mean - self.reference


def _ttest(out: np.ndarray, ref: float, alternative: str) -> tuple[float, str]:
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}")
    if alternative == "auto":
        alternative = "greater" if out.mean() >= ref else "less"
    if np.ptp(out) == 0:  # no spread: either exactly the reference or a degenerate certainty
        return (1.0 if out[0] == ref else 0.0), alternative
    return float(stats.ttest_1samp(out, ref, alternative=alternative).pvalue), alternative


def shifted_outputs(net: Network, x, delta: float, n: int, seed: int = 0, *, mask=None,
                    stream: int = 0) -> np.ndarray:
    if delta == 0:
        return np.full(n, net.forward(x))
    shift = ShiftSpec.for_network(net, delta, mask=mask)
    return SampleBatch(net, shift, n, seed, stream).outputs(x)


def expectation_test(net: Network, x, delta: float, n: int = 100_000, seed: int = 0, *,
                     reference: float | None = None, alternative: str = "greater", mask=None,
                     stream: int = 0) -> MeanTest:
    """One-sample t-test of the mean shifted output at ``x`` against ``reference``
    (the unshifted output by default)."""
    ref = net.forward(x) if reference is None else float(reference)
    out = shifted_outputs(net, x, delta, n, seed, mask=mask, stream=stream)
    p, alt = _ttest(out, ref, alternative)
    return MeanTest(float(out.mean()), ref, float(out.std(ddof=1)) if n > 1 else 0.0, n, p, alt)


@dataclass
class NomsRow:
    delta: float
    n: int
    avg_diff: float
    rejection_pct: float


def noms_compare(base: Network, cfxs, deltas, n_list, seed: int = 0, *, mask=None,
                 alternative: str = "auto", test_alpha: float = 0.05) -> list[NomsRow]:
    """For each (delta, n): mean |M'(x') - M(x')| over the counterfactuals and the
    percentage whose t-test rejects an unchanged mean prediction."""
    C = np.atleast_2d(np.asarray(cfxs, dtype=np.float64))
    rows = []
    cell = 0
    for delta in deltas:
        if delta < 0:
            raise ValueError("deltas must be non-negative")
        for n in n_list:
            diffs, rejects = [], 0
            for i, x in enumerate(C):
                ref = base.forward(x)
                out = shifted_outputs(base, x, delta, int(n), seed, mask=mask,
                                      stream=cell * C.shape[0] + i)
                diffs.append(float(np.abs(out - ref).mean()))
                p, _ = _ttest(out, ref, alternative)
                rejects += p < test_alpha
            rows.append(NomsRow(float(delta), int(n), float(np.mean(diffs)),
                                100.0 * rejects / C.shape[0]))
            cell += 1
    return rows
