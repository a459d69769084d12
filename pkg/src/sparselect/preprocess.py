"""Dataset preparation: standardization, one-hot encoding, random
over-sampling, stratified splitting, and bounding-box label derivation.

Standardization uses population statistics (divide by n) and persists the
training means/stds so the exact same transform can be replayed on unseen
data. All randomized operations take an explicit seed and use numpy's
``default_rng`` (PCG64), so runs are reproducible.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .tensorio import as_matrix

DEFAULT_EPSILON = 1e-12


@dataclass(frozen=True)
class StandardizationStats:
    """Per-feature means and population stds fitted on training data."""

    means: np.ndarray
    stds: np.ndarray
    epsilon: float = DEFAULT_EPSILON


@dataclass(frozen=True)
class Dataset:
    """A feature matrix paired with one integer label per row."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = as_matrix(self.features)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if features.shape[0] != labels.shape[0]:
            raise ContractError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if labels.size and labels.min() < 0:
            raise ContractError("labels must be non-negative")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ContractError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )


def fit_standardizer(X, epsilon: float = DEFAULT_EPSILON) -> StandardizationStats:
    """Compute per-column mean and population standard deviation."""
    X = as_matrix(X)
    if X.shape[0] < 1:
        raise ContractError("cannot fit a standardizer on an empty matrix")
    if epsilon <= 0:
        raise ContractError("epsilon must be positive")
    return StandardizationStats(X.mean(axis=0), X.std(axis=0), float(epsilon))


def apply_standardizer(X, stats: StandardizationStats) -> np.ndarray:
    """Center and scale columns; constant columns map to zero via the epsilon guard."""
    X = as_matrix(X)
    if X.shape[1] != stats.means.shape[0]:
        raise ContractError(
            f"matrix has {X.shape[1]} columns but stats were fitted on {stats.means.shape[0]}"
        )
    return (X - stats.means) / np.maximum(stats.stds, stats.epsilon)


def save_stats(stats: StandardizationStats, path) -> None:
    payload = {
        "means": [float(v) for v in stats.means],
        "stds": [float(v) for v in stats.stds],
        "epsilon": stats.epsilon,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_stats(path) -> StandardizationStats:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return StandardizationStats(
        np.asarray(payload["means"], dtype=np.float64),
        np.asarray(payload["stds"], dtype=np.float64),
        float(payload["epsilon"]),
    )


def one_hot(labels, n_classes: int) -> np.ndarray:
    """Encode integer labels as indicator rows of width ``n_classes``."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if n_classes < 1:
        raise ContractError("n_classes must be at least 1")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ContractError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    out = np.zeros((labels.shape[0], n_classes), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def random_oversample(data: Dataset, seed: int) -> Dataset:
    """Duplicate minority-class rows (uniformly, with replacement) until every
    class matches the majority count. Original rows keep their order;
    duplicates are appended."""
    classes, counts = np.unique(data.labels, return_counts=True)
    if classes.size < 2:
        raise ContractError("over-sampling needs at least two classes")
    majority = int(counts.max())
    rng = np.random.default_rng(seed)
    extra_rows = []
    extra_labels = []
    for cls, count in zip(classes, counts):
        deficit = majority - int(count)
        if deficit == 0:
            continue
        members = np.flatnonzero(data.labels == cls)
        picks = members[rng.integers(0, members.size, size=deficit)]
        extra_rows.append(data.features[picks])
        extra_labels.append(np.full(deficit, cls, dtype=np.int64))
    if not extra_rows:
        return data
    return Dataset(
        np.vstack([data.features, *extra_rows]),
        np.concatenate([data.labels, *extra_labels]),
    )


def split_indices(labels, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministically partition row indices into (train, test).

    Stratified mode rounds each class's train count to the nearest integer,
    so class ratios survive up to rounding. Depends only on the labels and
    the seed, never on feature values.
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = labels.shape[0]
    if n < 2:
        raise ContractError("need at least two rows to split")
    rng = np.random.default_rng(spec.seed)
    if spec.stratified:
        train_parts = []
        test_parts = []
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            perm = rng.permutation(members)
            n_train = int(np.floor(members.size * spec.train_fraction + 0.5))
            train_parts.append(perm[:n_train])
            test_parts.append(perm[n_train:])
        train = np.sort(np.concatenate(train_parts))
        test = np.sort(np.concatenate(test_parts))
    else:
        perm = rng.permutation(n)
        n_train = int(np.floor(n * spec.train_fraction + 0.5))
        train = np.sort(perm[:n_train])
        test = np.sort(perm[n_train:])
    if train.size == 0 or test.size == 0:
        raise ContractError(
            f"train_fraction {spec.train_fraction} leaves an empty partition for n={n}"
        )
    return train, test


def train_test_split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Split a dataset into train and test parts per ``split_indices``."""
    train_idx, test_idx = split_indices(data.labels, spec)
    return (
        Dataset(data.features[train_idx], data.labels[train_idx]),
        Dataset(data.features[test_idx], data.labels[test_idx]),
    )


def derive_label(annotation_text: str) -> int:
    """Map bounding-box annotation text to a binary class.

    Each non-blank line must read ``class x_center y_center width height``
    with the four geometry fields in [0, 1]. Any well-formed box means the
    surface is defective (1); no boxes means defect-free (0).
    """
    boxes = 0
    for lineno, line in enumerate(annotation_text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 5:
            raise ParseError(f"line {lineno}: expected 5 fields, found {len(fields)}")
        try:
            cls = int(fields[0])
        except ValueError:
            raise ParseError(
                f"line {lineno}: class id is not an integer: {fields[0]!r}"
            ) from None
        if cls < 0:
            raise ParseError(f"line {lineno}: negative class id {cls}")
        names = ("x_center", "y_center", "width", "height")
        for name, raw in zip(names, fields[1:]):
            try:
                value = float(raw)
            except ValueError:
                raise ParseError(f"line {lineno}: {name} is not a number: {raw!r}") from None
            if not 0.0 <= value <= 1.0:
                raise ParseError(f"line {lineno}: {name}={raw} outside [0, 1]")
        boxes += 1
    return 1 if boxes else 0


def labels_from_annotations(annotation_dir, manifest_path) -> np.ndarray:
    """Derive one label per manifest stem from ``<stem>.txt`` annotation files.

    Manifest lines that are blank or start with ``#`` are ignored. A missing
    annotation file counts as defect-free and emits a warning.
    """
    annotation_dir = Path(annotation_dir)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        stems = [
            line.strip()
            for line in fh.read().splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
    labels = np.empty(len(stems), dtype=np.int64)
    for i, stem in enumerate(stems):
        path = annotation_dir / f"{stem}.txt"
        if not path.exists():
            warnings.warn(f"no annotation file for {stem!r}; labeling as defect-free")
            labels[i] = 0
            continue
        try:
            labels[i] = derive_label(path.read_text(encoding="utf-8"))
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None
    return labels
