"""Dense vector primitives: empirical class statistics and z-score standardization.

All public functions accept plain numpy arrays (float64, finite) and return
either arrays or small frozen containers. Feature matrices are row-major,
one sample per row. Variances are diagonal throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

DEFAULT_VAR_FLOOR = 1e-6
DEFAULT_SCALE_FLOOR = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


def as_feature_matrix(data) -> np.ndarray:
    """Validate and return a (rows, dim) float64 feature matrix.

    Raises DataError on an empty matrix ("empty class") or non-finite
    entries ("invalid feature").
    """
    m = np.asarray(data, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise DataError("empty class")
    if not np.all(np.isfinite(m)):
        raise DataError("invalid feature: non-finite entry")
    return m


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Validate and return a 1-D float64 vector with finite entries."""
    v = np.asarray(data, dtype=np.float64)
    if v.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size < 1:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(v)):
        raise DataError(f"{name} has non-finite entries")
    return v


@dataclass(frozen=True)
class ClassStats:
    """Per-class mean vector and diagonal of the covariance matrix."""

    mean: np.ndarray
    var_diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", _readonly(as_vector(self.mean, "mean")))
        object.__setattr__(self, "var_diag", _readonly(as_vector(self.var_diag, "var_diag")))
        if self.mean.shape != self.var_diag.shape:
            raise DataError(
                f"mean and var_diag must have equal length, got {self.mean.shape} vs {self.var_diag.shape}"
            )

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class StandardizationParams:
    """Per-dimension centering and scaling, fitted on one set of targets.

    ``scale`` entries are strictly positive; apply followed by invert is
    the identity to within 1e-10 relative error.
    """

    center: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", _readonly(as_vector(self.center, "center")))
        object.__setattr__(self, "scale", _readonly(as_vector(self.scale, "scale")))
        if self.center.shape != self.scale.shape:
            raise DataError("center and scale must have equal length")
        if np.any(self.scale <= 0.0):
            raise DataError("scale entries must be strictly positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def empirical_class_stats(features, var_floor: float = DEFAULT_VAR_FLOOR) -> ClassStats:
    """Empirical mean and diagonal variance of one class's feature rows.

    Uses the population divisor (1/n), so a single row yields zero variance,
    which is then floored at ``var_floor``.
    """
    m = as_feature_matrix(features)
    mean = m.mean(axis=0)
    var = np.square(m - mean).mean(axis=0)
    var = np.maximum(var, var_floor)
    return ClassStats(mean=mean, var_diag=var)


def zscore_fit(targets, scale_floor: float = DEFAULT_SCALE_FLOOR) -> StandardizationParams:
    """Fit per-column center and scale on a target matrix.

    Centers are column means; scales are population standard deviations,
    floored at ``scale_floor`` so degenerate (constant) columns stay usable.
    """
    m = as_feature_matrix(targets)
    if m.shape[0] < 2:
        raise DataError("insufficient rows to standardize (need at least 2)")
    center = m.mean(axis=0)
    scale = np.maximum(m.std(axis=0), scale_floor)
    return StandardizationParams(center=center, scale=scale)


def _check_dim(params: StandardizationParams, m: np.ndarray) -> None:
    if m.shape[-1] != params.dim:
        raise DataError(
            f"dimension mismatch: data has {m.shape[-1]} columns, params expect {params.dim}"
        )


def zscore_apply(params: StandardizationParams, m) -> np.ndarray:
    """Standardize rows (or a single vector): (x - center) / scale."""
    a = np.asarray(m, dtype=np.float64)
    _check_dim(params, a)
    return (a - params.center) / params.scale


def zscore_invert(params: StandardizationParams, m) -> np.ndarray:
    """Exact inverse of :func:`zscore_apply`: x * scale + center."""
    a = np.asarray(m, dtype=np.float64)
    _check_dim(params, a)
    return a * params.scale + params.center
