"""Local outlier factor scored against a fixed reference set (novelty mode)."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

LOF_K = 20
LOF_THRESHOLD = 1.5
_EPS = 1e-10  # keeps lrd finite when neighbours coincide


class LofScorer(OutlierMixin, BaseEstimator):
    """LOF of query points relative to the reference data given to ``fit``.

    Reference points are scored against the rest of the reference set; a query
    point is never its own neighbour. ``predict`` returns +1 for inliers
    (score <= threshold) and -1 otherwise.
    """

    def __init__(self, n_neighbors: int = LOF_K, threshold: float = LOF_THRESHOLD):
        self.n_neighbors = n_neighbors
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        k = self.n_neighbors
        if k < 2 or X.shape[0] <= k:
            raise ValueError(f"need k >= 2 and more than k reference points (k={k}, m={X.shape[0]})")
        D = cdist(X, X)
        np.fill_diagonal(D, np.inf)
        nn = np.argsort(D, axis=1, kind="stable")[:, :k]
        nd = np.take_along_axis(D, nn, axis=1)
        self.ref_ = X
        self.k_distance_ = nd[:, -1]
        reach = np.maximum(nd, self.k_distance_[nn])
        self.lrd_ = 1.0 / (reach.mean(axis=1) + _EPS)
        self.n_features_in_ = X.shape[1]
        return self

    def score_samples(self, X):
        """LOF scores (about 1 for inliers, larger for outliers)."""
        check_is_fitted(self, "ref_")
        X = check_array(X, dtype=np.float64)
        D = cdist(X, self.ref_)
        nn = np.argsort(D, axis=1, kind="stable")[:, :self.n_neighbors]
        nd = np.take_along_axis(D, nn, axis=1)
        reach = np.maximum(nd, self.k_distance_[nn])
        lrd = 1.0 / (reach.mean(axis=1) + _EPS)
        return self.lrd_[nn].mean(axis=1) / lrd

    def predict(self, X):
        return np.where(self.score_samples(X) <= self.threshold, 1, -1)


def lof_score(point, reference_data, k: int = LOF_K) -> float:
    return float(LofScorer(k).fit(reference_data).score_samples(np.atleast_2d(point))[0])


def lof_label(point, reference_data, k: int = LOF_K, threshold: float = LOF_THRESHOLD) -> int:
    return int(LofScorer(k, threshold).fit(reference_data).predict(np.atleast_2d(point))[0])
