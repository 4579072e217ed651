"""Evaluation metrics: AUROC, accuracy, MSE and confidence intervals."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def auroc(scores, labels) -> float:
    """Area under the ROC curve via the rank statistic, ties counted 1/2.

    Equals the probability that a uniformly random positive outranks a
    uniformly random negative. O(n log n).

    Raises DataError when labels contain only one class ("undefined AUROC").
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and labels must be 1-D arrays of equal length")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("undefined AUROC: need at least one positive and one negative label")
    ranks = rankdata(s, method="average")
    pos_rank_sum = float(ranks[y].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy(predictions, labels) -> float:
    """Fraction of predictions equal to labels."""
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape or p.ndim != 1:
        raise DataError("predictions and labels must be 1-D arrays of equal length")
    if p.size < 1:
        raise DataError("empty prediction list")
    return float(np.mean(p == y))


def mse(preds, targets) -> float:
    """Mean squared error, averaged over both rows and dimensions.

    With targets standardized on the same split (population scaling), the
    constant column-mean predictor scores exactly 1 under this normalization.
    """
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise DataError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.size < 1:
        raise DataError("empty inputs")
    return float(np.mean(np.square(p - t)))


def confidence_interval(values) -> tuple[float, float]:
    """(mean, 1.96 * std / sqrt(n)) over a sequence of per-run values.

    Population std (ddof=0); a single value yields half-width 0.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DataError("need a non-empty 1-D value list")
    mean = float(v.mean())
    if v.size == 1:
        return mean, 0.0
    half = 1.96 * float(v.std()) / float(np.sqrt(v.size))
    return mean, half


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) step points of the ROC curve, sorted by threshold.

    Helper for report output; AUROC itself is computed by :func:`auroc`.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("undefined ROC: need both classes")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    # keep only the last point of each tied-threshold block
    distinct = np.append(np.diff(s[order]) != 0.0, True)
    tpr = np.concatenate(([0.0], tp[distinct] / n_pos))
    fpr = np.concatenate(([0.0], fp[distinct] / n_neg))
    return fpr, tpr
