"""Confusion matrix, accuracy and Cohen's kappa."""

from __future__ import annotations

import numpy as np


class EvaluationError(ValueError):
    pass


def confusion_matrix(predicted, actual, n_classes: int) -> np.ndarray:
    """Counts with rows indexed by predicted class and columns by actual class (1-based ids)."""
    predicted = np.asarray(predicted, dtype=int)
    actual = np.asarray(actual, dtype=int)
    if predicted.shape != actual.shape:
        raise ValueError("predicted and actual differ in length")
    for v in (predicted, actual):
        if v.size and (v.min() < 1 or v.max() > n_classes):
            raise ValueError(f"class ids must lie in 1..{n_classes}")
    cm = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(cm, (predicted - 1, actual - 1), 1)
    return cm


def accuracy(cm) -> float:
    cm = np.asarray(cm)
    total = cm.sum()
    if total <= 0:
        raise EvaluationError("empty confusion matrix")
    return float(np.trace(cm) / total)


def kappa(cm) -> float:
    """Cohen's kappa, (N sum C_ii - sum C_i. C_.i) / (N^2 - sum C_i. C_.i).

    All mass in one diagonal cell leaves 0/0; that case scores 1.0.
    """
    cm = np.asarray(cm, dtype=float)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError("confusion matrix must be square")
    n = cm.sum()
    if n <= 0:
        raise EvaluationError("empty confusion matrix")
    chance = float(cm.sum(axis=1) @ cm.sum(axis=0))
    denom = n * n - chance
    if denom == 0:
        if np.trace(cm) == n:
            return 1.0
        raise EvaluationError("kappa undefined: chance agreement equals N^2 without perfect agreement")
    return float((n * np.trace(cm) - chance) / denom)
