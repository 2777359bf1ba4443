"""Multi-class metrics for the classification slices."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def confusion_matrix(preds: Sequence[str], golds: Sequence[str], classes: Sequence[str]) -> np.ndarray:
    """Rows are gold classes, columns predictions, both in ``classes`` order."""
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions for {len(golds)} gold labels")
    if not golds:
        raise ValueError("metrics need at least one example")
    index = {c: i for i, c in enumerate(classes)}
    unknown = (set(golds) | set(preds)) - index.keys()
    if unknown:
        raise ValueError(f"labels outside the class list: {sorted(unknown)}")
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(cm, ([index[g] for g in golds], [index[p] for p in preds]), 1)
    return cm


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def macro_f1(preds: Sequence[str], golds: Sequence[str], classes: Sequence[str]) -> float:
    """Unweighted mean F1 over the classes that occur among golds or predictions."""
    cm = confusion_matrix(preds, golds, classes)
    seen = (cm.sum(axis=0) + cm.sum(axis=1)) > 0
    return float(per_class_f1(cm)[seen].mean())


def balanced_accuracy(preds: Sequence[str], golds: Sequence[str], classes: Sequence[str]) -> float:
    """Unweighted mean recall over the classes that occur among golds."""
    cm = confusion_matrix(preds, golds, classes)
    support = cm.sum(axis=1)
    present = support > 0
    return float((np.diag(cm)[present] / support[present]).mean())
