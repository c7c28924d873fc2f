from .data import Dataset, load_csv, make_two_clusters, save_csv, split_halves
from .lof import LofScorer, lof_label, lof_score
from .metrics import EvalReport, delta_e, evaluate, l1_distance, vm_metrics
from .noms import MeanTest, NomsRow, expectation_test, noms_compare
from .training import NetworkClassifier, TrainingDivergedError, init_network, shift_protocol, train

__all__ = [
    "Dataset", "load_csv", "make_two_clusters", "save_csv", "split_halves",
    "LofScorer", "lof_label", "lof_score",
    "EvalReport", "delta_e", "evaluate", "l1_distance", "vm_metrics",
    "MeanTest", "NomsRow", "expectation_test", "noms_compare",
    "NetworkClassifier", "TrainingDivergedError", "init_network", "shift_protocol", "train",
]
