"""Binary-classification evaluation with class 1 ("defective") positive.

Any metric whose denominator is zero returns 0.0 by policy; only the
accuracy of an empty evaluation is an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true, dtype=np.int64).reshape(-1)
    p = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if t.shape[0] != p.shape[0]:
        raise ContractError(f"{t.shape[0]} truth labels but {p.shape[0]} predictions")
    for name, arr in (("truth", t), ("prediction", p)):
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ContractError(f"{name} labels must be 0 or 1")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
        tn=int(np.sum((t == 0) & (p == 0))),
    )


def accuracy(c: ConfusionMatrix) -> float:
    if c.total == 0:
        raise ContractError("accuracy of an empty evaluation is undefined")
    return (c.tp + c.tn) / c.total


def precision(c: ConfusionMatrix) -> float:
    denom = c.tp + c.fp
    return c.tp / denom if denom else 0.0


def recall(c: ConfusionMatrix) -> float:
    denom = c.tp + c.fn
    return c.tp / denom if denom else 0.0


def f1(c: ConfusionMatrix) -> float:
    p = precision(c)
    r = recall(c)
    return 2.0 * p * r / (p + r) if p + r else 0.0
