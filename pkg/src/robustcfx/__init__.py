"""Certification and generation of counterfactual explanations that survive plausible model shifts."""

from .apds import ApdsResult, Confidence, apds, check_robust_at, confidence_of, sample_size
from .enumeration import EnumerationReport, decide_robust, enumerate_shifts, provable_delta
from .generation import (CfxRequest, CfxResult, RobustCounterfactualExplainer, compute_cfx,
                         generate_robust_cfx)
from .intervals import Interval, IntervalNetwork, Verdict, abstract, propagate, verdict
from .network import (THRESHOLD, DenseLayer, ModelFormatError, Network, dense_network, forward,
                      load_model, param_distance, save_model)
from .reduction import Cnf, GadgetNetwork, build_reduction, check_equivalence, parse_dimacs
from .sampling import SampleBatch, ShiftSpec, realizations, sample_realization

__version__ = "0.1.0"

__all__ = [
    "ApdsResult", "Confidence", "apds", "check_robust_at", "confidence_of", "sample_size",
    "EnumerationReport", "decide_robust", "enumerate_shifts", "provable_delta",
    "CfxRequest", "CfxResult", "RobustCounterfactualExplainer", "compute_cfx",
    "generate_robust_cfx",
    "Interval", "IntervalNetwork", "Verdict", "abstract", "propagate", "verdict",
    "THRESHOLD", "DenseLayer", "ModelFormatError", "Network", "dense_network", "forward",
    "load_model", "param_distance", "save_model",
    "Cnf", "GadgetNetwork", "build_reduction", "check_equivalence", "parse_dimacs",
    "SampleBatch", "ShiftSpec", "realizations", "sample_realization",
]
