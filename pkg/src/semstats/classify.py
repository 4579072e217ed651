"""Mahalanobis classifiers with diagonal covariance.

One-class scoring uses the Gaussian log-likelihood; multi-class decisions
use a softmin over root Mahalanobis distances, which generalizes the
nearest-class-mean rule (identical decisions under identity covariance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ClassStats
from .errors import DataError

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ClassModel:
    """Adapted per-class Gaussian (mean + diagonal covariance) with a label."""

    stats: ClassStats
    label: str

    def __post_init__(self):
        if np.any(self.stats.var_diag <= 0.0):
            raise DataError(f"class {self.label!r}: var_diag must be strictly positive")


def _check_x(x, dim: int) -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != dim:
        raise DataError(f"query must be a vector of length {dim}, got shape {v.shape}")
    return v


def mahalanobis_sq(x, stats: ClassStats) -> float:
    """Squared Mahalanobis distance sum_j (x_j - mu_j)^2 / var_j."""
    v = _check_x(x, stats.dim)
    d = v - stats.mean
    return float(np.sum(d * d / stats.var_diag))


def oneclass_log_likelihood(x, stats: ClassStats) -> float:
    """Log density of x under N(mean, diag(var)): -(d ln 2pi + sum ln var + m^2) / 2."""
    m2 = mahalanobis_sq(x, stats)
    log_det = float(np.sum(np.log(stats.var_diag)))
    return -0.5 * (stats.dim * _LOG_2PI + log_det + m2)


def oneclass_score(x, stats: ClassStats) -> float:
    """Score fed to AUROC; higher = more in-class.

    The log-likelihood itself: AUROC is rank-based, so any strictly
    monotone transform of the likelihood gives identical results.
    """
    return oneclass_log_likelihood(x, stats)


def _distance_matrix(x: np.ndarray, models: list[ClassModel]) -> np.ndarray:
    means = np.stack([m.stats.mean for m in models])
    variances = np.stack([m.stats.var_diag for m in models])
    d = x - means
    return np.sum(d * d / variances, axis=1)


def multiclass_posterior(x, models: list[ClassModel], mode: str = "distance") -> np.ndarray:
    """Class probabilities for a query under the Mahalanobis posterior.

    mode="distance" (default): softmax over negated root distances,
    p_c proportional to exp(-sqrt(m2_c)).
    mode="density": softmax over Gaussian log-densities instead.

    Computed in the log domain with max-shift, so d ~ 1000 is safe.
    """
    if len(models) < 2:
        raise DataError("multiclass posterior needs at least 2 class models")
    dim = models[0].stats.dim
    v = _check_x(x, dim)
    for m in models:
        if m.stats.dim != dim:
            raise DataError("class models have inconsistent dimensions")
    if mode == "distance":
        logits = -np.sqrt(_distance_matrix(v, models))
    elif mode == "density":
        logits = np.array([oneclass_log_likelihood(v, m.stats) for m in models])
    else:
        raise DataError(f"unknown posterior mode {mode!r}")
    shifted = logits - logits.max()
    w = np.exp(shifted)
    return w / w.sum()


def classify(x, models: list[ClassModel]) -> str:
    """Label of the class minimizing the Mahalanobis distance.

    Exact ties go to the first model in list order.
    """
    if len(models) < 2:
        raise DataError("classification needs at least 2 class models")
    dim = models[0].stats.dim
    v = _check_x(x, dim)
    d2 = _distance_matrix(v, models)
    return models[int(np.argmin(d2))].label
