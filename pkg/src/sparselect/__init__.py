"""Sparse-modeling feature selection toolkit.

Standardize and balance a feature matrix, select features with L1-regularized
solvers (coordinate descent or proximal gradient), reduce with PCA/KPCA
baselines, classify with a deterministic brute-force KNN, and report binary
classification metrics. Everything is driven either as a library or through
the ``sparselect`` command-line interface.
"""

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "cli",
    "dimred",
    "errors",
    "metrics",
    "neighbors",
    "pipeline",
    "preprocess",
    "sparse",
    "tensorio",
]
