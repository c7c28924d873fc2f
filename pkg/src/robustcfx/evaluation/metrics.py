"""Validity, proximity, plausibility and model-change metrics for a set of counterfactuals."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..network import THRESHOLD, Network, param_distance
from .lof import LOF_K, LOF_THRESHOLD, LofScorer


def l1_distance(x, x_prime) -> float:
    return float(np.abs(np.asarray(x_prime, dtype=np.float64) - np.asarray(x, dtype=np.float64)).sum())


def _valid_pct(net: Network, cfxs) -> float:
    C = np.atleast_2d(np.asarray(cfxs, dtype=np.float64))
    if C.size == 0:
        return 0.0
    return 100.0 * float(np.mean(net.predict_output(C) >= THRESHOLD))


def vm_metrics(cfxs, base: Network, shifted: Network) -> tuple[float, float]:
    """Percentage of counterfactuals valid on the base and on the shifted model."""
    return _valid_pct(base, cfxs), _valid_pct(shifted, cfxs)


def delta_e(base: Network, shifted: Network) -> float:
    """Largest absolute parameter change between two models of the same shape."""
    return param_distance(base.flatten(), shifted.flatten(), "inf")


@dataclass
class EvalReport:
    vm1: float
    vm2: float
    mean_l1: float
    mean_lof: float
    delta_e: float
    n_cfx: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(inputs, cfxs, base: Network, shifted: Network, reference_data, *, k: int = LOF_K,
             threshold: float = LOF_THRESHOLD) -> EvalReport:
    """Metrics over paired original inputs and counterfactuals (rows)."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    C = np.atleast_2d(np.asarray(cfxs, dtype=np.float64))
    if X.shape != C.shape:
        raise ValueError("inputs and counterfactuals must have the same shape")
    vm1, vm2 = vm_metrics(C, base, shifted)
    labels = LofScorer(k, threshold).fit(reference_data).predict(C)
    return EvalReport(vm1, vm2, float(np.abs(C - X).sum(axis=1).mean()), float(labels.mean()),
                      delta_e(base, shifted), C.shape[0])
