"""Deterministic brute-force K-nearest-neighbors classification.

Squared Euclidean distances rank neighbors (same order as Euclidean,
no square roots). Distance ties go to the lower training-row index, vote
ties to the smaller class label, so predictions are fully reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensorio import as_matrix


@dataclass(frozen=True)
class KnnModel:
    train_features: np.ndarray
    train_labels: np.ndarray
    k: int
    metric: str = "euclidean"


def knn_fit(X, y, k: int, metric: str = "euclidean") -> KnnModel:
    """Store the training set verbatim (lazy learner)."""
    X = as_matrix(X).copy()
    y = np.asarray(y, dtype=np.int64).reshape(-1).copy()
    if X.shape[0] != y.shape[0]:
        raise ContractError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
    if not 1 <= k <= X.shape[0]:
        raise ContractError(f"k must lie in [1, {X.shape[0]}], got {k}")
    if y.size and y.min() < 0:
        raise ContractError("labels must be non-negative")
    if metric != "euclidean":
        raise ContractError(f"unsupported metric {metric!r}")
    return KnnModel(X, y, int(k), metric)


def knn_predict(model: KnnModel, Xq) -> np.ndarray:
    """Majority vote over the k nearest training rows for each query row."""
    Xq = as_matrix(Xq)
    if Xq.shape[1] != model.train_features.shape[1]:
        raise ContractError(
            f"queries have {Xq.shape[1]} columns but training data has "
            f"{model.train_features.shape[1]}"
        )
    preds = np.empty(Xq.shape[0], dtype=np.int64)
    for i, row in enumerate(Xq):
        diff = model.train_features - row
        dist_sq = np.einsum("ij,ij->i", diff, diff)
        nearest = np.argsort(dist_sq, kind="stable")[: model.k]
        votes = np.bincount(model.train_labels[nearest])
        preds[i] = int(np.argmax(votes))  # first max, i.e. the smallest label
    return preds
