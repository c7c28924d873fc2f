"""Sampling-based certification of the largest tolerable plausible shift.

The search runs a robustness test at ``delta_init``, doubles ``delta`` while the
test passes, then bisects the last bracket down to a width of ``delta_init``.
The test draws ``n`` realizations from the shift box and passes when at most
``k`` of them flip the decision. ``n`` comes from Wilks' tolerance bound
``alpha = 1 - R**n``. For that ``n``, ``k`` is 0, so every sample must stay
valid. Larger ``n`` gets a higher-order tolerance limit: ``k`` is the largest
count with ``P(Binomial(n, 1 - R) <= k) <= 1 - alpha``. Passing then still
means at most a ``1 - R`` fraction of the box flips, with confidence ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .network import Network
from .sampling import ShiftSpec, count_failures

DELTA_INIT = 1e-4
MAX_DOUBLINGS = 64


class SearchDivergedError(RuntimeError):
    """The exponential phase never found a failing shift."""


def _check_R(R):
    if not 0.0 < R < 1.0:
        raise ValueError(f"R must lie in (0, 1), got {R!r}")


def _miss(alpha, miss):
    if miss is None:
        if alpha is None or not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha!r}")
        return 1.0 - alpha
    if not 0.0 < miss < 1.0:
        raise ValueError(f"miss probability must lie in (0, 1), got {miss!r}")
    return float(miss)


def sample_size(alpha: float | None, R: float, *, miss: float | None = None) -> int:
    """Realizations needed so that ``1 - R**n`` reaches ``alpha``.

    ``log(1 - alpha) / log(R)`` is rounded to the nearest integer, so the
    achieved miss probability ``R**n`` is within a factor ``R**-0.5`` of
    ``1 - alpha``. That gives n = 1378 for (0.999, 0.995). Pass ``miss`` instead
    of ``alpha`` when ``1 - alpha`` underflows double precision, e.g. 1e-40.
    """
    _check_R(R)
    m = _miss(alpha, miss)
    return max(1, int(round(math.log(m) / math.log(R))))


def confidence_of(n: int, R: float) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    _check_R(R)
    return 1.0 - R ** n


def tolerated_failures(n: int, R: float, miss: float) -> int:
    """Largest ``k >= 0`` with ``P(Binomial(n, 1-R) <= k) <= miss`` (0 if none)."""
    p = 1.0 - R
    k = int(stats.binom.ppf(miss, n, p))
    if stats.binom.cdf(k, n, p) > miss:
        k -= 1
    return max(k, 0)


@dataclass(frozen=True)
class Confidence:
    """Tolerance parameters. ``miss`` is ``1 - alpha``, kept exactly."""

    R: float
    miss: float
    n_override: int | None = None

    def __post_init__(self):
        _check_R(self.R)
        _miss(None, self.miss)
        if self.n_override is not None and self.n_override < sample_size(None, self.R, miss=self.miss):
            raise ValueError("n_override must not be below the Wilks sample size")

    @classmethod
    def of(cls, alpha: float | None = 0.999, R: float = 0.995, *, miss: float | None = None,
           n: int | None = None) -> "Confidence":
        return cls(R, _miss(alpha, miss), n)

    @property
    def alpha(self) -> float:
        return 1.0 - self.miss

    @property
    def n(self) -> int:
        return self.n_override or sample_size(None, self.R, miss=self.miss)

    @property
    def tolerated(self) -> int:
        return tolerated_failures(self.n, self.R, self.miss)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "miss": self.miss, "R": self.R, "n": self.n,
                "tolerated_failures": self.tolerated}


@dataclass
class ApdsResult:
    delta_max: float
    confidence: Confidence
    iterations: int
    samples_used: int
    seed: int
    trace: list[tuple[float, bool]] = field(default_factory=list, repr=False)

    @property
    def gate_passed(self) -> bool:
        return self.delta_max > 0

    def as_dict(self) -> dict:
        return {"delta_max": self.delta_max, "iterations": self.iterations,
                "samples_used": self.samples_used, "seed": self.seed,
                **self.confidence.as_dict()}


def shift_search(is_robust: Callable[[float], bool], delta_init: float = DELTA_INIT,
                 max_doublings: int = MAX_DOUBLINGS) -> float:
    """Exponential then binary search for the largest delta passing ``is_robust``.

    Returns 0 when the test already fails at ``delta_init``.
    """
    if not is_robust(delta_init):
        return 0.0
    delta = delta_init
    for _ in range(max_doublings):
        delta *= 2.0
        if not is_robust(delta):
            break
    else:
        raise SearchDivergedError(
            f"still robust after {max_doublings} doublings (delta = {delta:g}); "
            "the output may not depend on the perturbed parameters"
        )
    best = delta / 2.0
    while abs(delta - best) > delta_init:
        mid = 0.5 * (best + delta)
        if is_robust(mid):
            best = mid
        else:
            delta = mid
    return best


def _check_output(net: Network, x) -> float:
    y = net.forward(x)
    if not math.isfinite(y):
        raise FloatingPointError(f"network output at the counterfactual is {y}")
    return y


def check_robust_at(net: Network, x, delta: float, alpha: float | None = 0.999, R: float = 0.995,
                    seed: int = 0, *, miss: float | None = None, n: int | None = None,
                    mask=None, stream: int = 0) -> bool:
    """Sampled robustness test at a fixed shift magnitude."""
    conf = Confidence.of(alpha, R, miss=miss, n=n)
    shift = ShiftSpec.for_network(net, delta, mask=mask)
    return count_failures(net, x, shift, conf.n, seed, stream) <= conf.tolerated


def apds(net: Network, x, alpha: float | None = 0.999, R: float = 0.995, seed: int = 0, *,
         miss: float | None = None, n: int | None = None, mask=None,
         delta_init: float = DELTA_INIT, max_doublings: int = MAX_DOUBLINGS) -> ApdsResult:
    """Largest shift for which ``x`` keeps class 1 on at least a fraction ``R`` of the box.

    Each robustness test draws a fresh batch keyed by ``(seed, call index)``.
    """
    _check_output(net, x)
    conf = Confidence.of(alpha, R, miss=miss, n=n)
    n_samples, k = conf.n, conf.tolerated
    base = ShiftSpec.for_network(net, 0.0, mask=mask)
    trace: list[tuple[float, bool]] = []

    def is_robust(delta: float) -> bool:
        fails = count_failures(net, x, base.with_delta(delta), n_samples, seed, stream=len(trace))
        ok = fails <= k
        trace.append((delta, ok))
        return ok

    delta_max = shift_search(is_robust, delta_init, max_doublings)
    return ApdsResult(delta_max, conf, len(trace), len(trace) * n_samples, seed, trace)
