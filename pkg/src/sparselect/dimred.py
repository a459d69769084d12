"""PCA and RBF kernel PCA baselines.

PCA picks the eigendecomposition route by shape: the d x d covariance when
d <= n, otherwise the n x n Gram matrix (both population-scaled), which is
what makes very wide matrices tractable. Components follow a fixed sign
convention (the largest-magnitude entry of each component is positive) so
results are comparable across implementations.

KPCA keeps the training data, double-centers the kernel matrix, and scales
eigenvectors by 1/sqrt(eigenvalue), so projecting the training set again
reproduces the fit-time projections. The ``"linear"`` kernel exists for
verification against plain PCA; production use is ``"rbf"``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FormatError
from .tensorio import as_matrix, load_matrix_bin, save_matrix_bin

_EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray  # (k,), nonincreasing

    @property
    def k(self) -> int:
        return self.components.shape[0]


@dataclass(frozen=True)
class KpcaModel:
    train_data: np.ndarray  # (n, d)
    gamma: float
    kernel: str  # "rbf" or "linear"
    alphas: np.ndarray  # (n, k): eigenvectors scaled by 1/sqrt(eigenvalue)
    eigenvalues: np.ndarray  # (k,)
    kernel_row_means: np.ndarray  # (n,) column means of the training kernel
    kernel_grand_mean: float
    notes: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.alphas.shape[1]


def _orient_rows(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return out


def _complete_orthonormal(rows: list[np.ndarray], needed: int, dim: int) -> list[np.ndarray]:
    """Extend ``rows`` with canonical directions made orthonormal to them."""
    basis = list(rows)
    e = 0
    while len(basis) < needed and e < dim:
        candidate = np.zeros(dim)
        candidate[e] = 1.0
        for row in basis:
            candidate -= (candidate @ row) * row
        norm = float(np.linalg.norm(candidate))
        if norm > 1e-8:
            basis.append(candidate / norm)
        e += 1
    if len(basis) < needed:
        raise ContractError("could not complete an orthonormal basis")
    return basis


def pca_fit(X, k: int) -> PcaModel:
    """Top-k principal directions of the centered data with their
    population-variance eigenvalues."""
    X = as_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ContractError("PCA needs at least two rows")
    k_max = min(n - 1, d)
    if not 1 <= k <= k_max:
        raise ContractError(f"k must lie in [1, {k_max}], got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    if d <= n:
        cov = (Xc.T @ Xc) / n
        eigvals, eigvecs = np.linalg.eigh(cov)
        order = np.argsort(eigvals)[::-1][:k]
        variance = eigvals[order]
        components = eigvecs[:, order].T
    else:
        gram = (Xc @ Xc.T) / n
        eigvals, eigvecs = np.linalg.eigh(gram)
        order = np.argsort(eigvals)[::-1][:k]
        variance = eigvals[order]
        rows: list[np.ndarray] = []
        for val, col in zip(variance, order):
            if val > _EIGENVALUE_FLOOR:
                u = eigvecs[:, col]
                rows.append((Xc.T @ u) / np.sqrt(n * val))
        # Rank-deficient data: zero-variance directions still need unit vectors.
        rows = _complete_orthonormal(rows, k, d)
        components = np.vstack(rows[:k])
    components = _orient_rows(components)
    return PcaModel(mean, components, np.asarray(variance, dtype=np.float64))


def pca_transform(X, model: PcaModel) -> np.ndarray:
    X = as_matrix(X)
    if X.shape[1] != model.mean.shape[0]:
        raise ContractError(
            f"matrix has {X.shape[1]} columns but model expects {model.mean.shape[0]}"
        )
    return (X - model.mean) @ model.components.T


def pca_inverse(Z, model: PcaModel) -> np.ndarray:
    Z = as_matrix(Z)
    if Z.shape[1] != model.k:
        raise ContractError(f"projections have {Z.shape[1]} columns but model has {model.k}")
    return Z @ model.components + model.mean


def _kernel_matrix(Xa: np.ndarray, Xb: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return Xa @ Xb.T
    if kernel == "rbf":
        sq = (
            np.sum(Xa * Xa, axis=1)[:, None]
            + np.sum(Xb * Xb, axis=1)[None, :]
            - 2.0 * (Xa @ Xb.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    raise ContractError(f"unknown kernel {kernel!r}; expected 'rbf' or 'linear'")


def kpca_fit(X, k: int, gamma: float | None = None, kernel: str = "rbf") -> KpcaModel:
    """Eigendecompose the double-centered kernel matrix.

    ``gamma`` defaults to ``1 / n_features``. If fewer than ``k`` components
    carry a positive eigenvalue, the model is truncated and the fact recorded
    in ``notes`` (and warned about), not raised.
    """
    X = as_matrix(X)
    n, d = X.shape
    if n < 2:
        raise ContractError("KPCA needs at least two rows")
    if not 1 <= k <= n:
        raise ContractError(f"k must lie in [1, {n}], got {k}")
    if gamma is None:
        if d == 0:
            raise ContractError("cannot infer gamma for a zero-column matrix")
        gamma = 1.0 / d
    if gamma <= 0:
        raise ContractError("gamma must be positive")
    K = _kernel_matrix(X, X, kernel, gamma)
    row_means = K.mean(axis=0)
    grand_mean = float(K.mean())
    Kc = K - row_means[None, :] - row_means[:, None] + grand_mean
    eigvals, eigvecs = np.linalg.eigh(Kc)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    keep = min(k, int(np.count_nonzero(eigvals > _EIGENVALUE_FLOOR)))
    notes: tuple[str, ...] = ()
    if keep < k:
        message = (
            f"requested {k} components but only {keep} have positive eigenvalues; "
            "model truncated"
        )
        notes = (message,)
        warnings.warn(message)
    vals = np.asarray(eigvals[:keep], dtype=np.float64)
    vecs = _orient_rows(eigvecs[:, :keep].T).T
    alphas = vecs / np.sqrt(vals)[None, :] if keep else np.zeros((n, 0))
    return KpcaModel(
        X.copy(), float(gamma), kernel, alphas, vals, row_means, grand_mean, notes
    )


def kpca_transform(Xq, model: KpcaModel) -> np.ndarray:
    """Project query rows: kernel against the training set, centered with the
    stored statistics, times the scaled eigenvectors."""
    Xq = as_matrix(Xq)
    if Xq.shape[1] != model.train_data.shape[1]:
        raise ContractError(
            f"matrix has {Xq.shape[1]} columns but model expects "
            f"{model.train_data.shape[1]}"
        )
    Kq = _kernel_matrix(Xq, model.train_data, model.kernel, model.gamma)
    Kq_centered = (
        Kq
        - model.kernel_row_means[None, :]
        - Kq.mean(axis=1)[:, None]
        + model.kernel_grand_mean
    )
    return Kq_centered @ model.alphas


def save_pca(model: PcaModel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix_bin(model.mean.reshape(1, -1), directory / "mean.spfm")
    save_matrix_bin(model.components, directory / "components.spfm")
    meta = {
        "kind": "pca",
        "k": model.k,
        "explained_variance": [float(v) for v in model.explained_variance],
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_pca(directory) -> PcaModel:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    if meta.get("kind") != "pca":
        raise FormatError(f"{directory}: not a PCA model directory")
    return PcaModel(
        load_matrix_bin(directory / "mean.spfm").reshape(-1),
        load_matrix_bin(directory / "components.spfm"),
        np.asarray(meta["explained_variance"], dtype=np.float64),
    )


def save_kpca(model: KpcaModel, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_matrix_bin(model.train_data, directory / "train_data.spfm")
    save_matrix_bin(model.alphas, directory / "alphas.spfm")
    save_matrix_bin(model.kernel_row_means.reshape(1, -1), directory / "row_means.spfm")
    meta = {
        "kind": "kpca",
        "k": model.k,
        "gamma": model.gamma,
        "kernel": model.kernel,
        "grand_mean": model.kernel_grand_mean,
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "notes": list(model.notes),
    }
    (directory / "meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_kpca(directory) -> KpcaModel:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text(encoding="utf-8"))
    if meta.get("kind") != "kpca":
        raise FormatError(f"{directory}: not a KPCA model directory")
    return KpcaModel(
        load_matrix_bin(directory / "train_data.spfm"),
        float(meta["gamma"]),
        str(meta["kernel"]),
        load_matrix_bin(directory / "alphas.spfm"),
        np.asarray(meta["eigenvalues"], dtype=np.float64),
        load_matrix_bin(directory / "row_means.spfm").reshape(-1),
        float(meta["grand_mean"]),
        tuple(meta.get("notes", ())),
    )
