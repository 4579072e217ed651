"""Few-shot adaptation of text-predicted statistics.

Means are blended with the empirical few-shot mean by a convex coefficient
alpha; diagonal covariances are shrunk toward the identity by beta. Both
coefficients can be picked on held-out validation data over a small grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError


def _check_unit(value: float, name: str) -> float:
    v = float(value)
    if not (0.0 <= v <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {v}")
    return v


@dataclass(frozen=True)
class AdaptConfig:
    """Blend coefficients: alpha for the mean, beta for the covariance."""

    alpha: float
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_unit(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _check_unit(self.beta, "beta"))


@dataclass(frozen=True)
class HyperGrid:
    """Search space for (alpha, beta) selection."""

    alphas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        if len(self.alphas) == 0 or len(self.betas) == 0:
            raise ConfigError("grid must have at least one alpha and one beta")
        object.__setattr__(self, "alphas", tuple(_check_unit(a, "alpha") for a in self.alphas))
        object.__setattr__(self, "betas", tuple(_check_unit(b, "beta") for b in self.betas))


def default_grid(step: float = 0.1) -> HyperGrid:
    """alpha, beta in {0, step, ..., 1}."""
    values = tuple(np.round(np.arange(0.0, 1.0 + step / 2, step), 10))
    return HyperGrid(alphas=values, betas=values)


def interpolate_mean(empirical_mean, text_mean, alpha: float) -> np.ndarray:
    """(1 - alpha) * empirical + alpha * text; exact at both endpoints.

    Zero-shot callers (no empirical mean available) must pass alpha = 1.
    """
    _check_unit(alpha, "alpha")
    e = np.asarray(empirical_mean, dtype=np.float64)
    t = np.asarray(text_mean, dtype=np.float64)
    if e.shape != t.shape:
        raise DataError(f"mean dimension mismatch: {e.shape} vs {t.shape}")
    if alpha == 0.0:
        return e.copy()
    if alpha == 1.0:
        return t.copy()
    return (1.0 - alpha) * e + alpha * t


def shrink_cov(text_var_diag, beta: float) -> np.ndarray:
    """Diagonal shrinkage toward the identity: (1 - beta) * 1 + beta * var.

    Output is strictly positive for any beta in [0, 1] as long as the text
    variances are. Exact at both endpoints.
    """
    _check_unit(beta, "beta")
    v = np.asarray(text_var_diag, dtype=np.float64)
    if beta == 0.0:
        return np.ones_like(v)
    if beta == 1.0:
        return v.copy()
    return (1.0 - beta) + beta * v


def select_hyperparams(
    grid: HyperGrid,
    val_episodes: Sequence,
    scorer: Callable[[object, AdaptConfig], float],
) -> AdaptConfig:
    """Pick the (alpha, beta) pair maximizing the mean validation score.

    ``scorer(episode, config)`` returns the task metric (accuracy or AUROC)
    of one validation episode under one candidate pair. Ties are broken
    toward smaller alpha, then smaller beta, so the result is deterministic
    for any grid ordering.
    """
    if len(val_episodes) == 0:
        raise DataError("hyperparameter selection needs at least one validation episode")
    best: AdaptConfig | None = None
    best_score = -np.inf
    for alpha in sorted(set(grid.alphas)):
        for beta in sorted(set(grid.betas)):
            config = AdaptConfig(alpha=alpha, beta=beta)
            score = float(np.mean([scorer(ep, config) for ep in val_episodes]))
            if score > best_score:
                best, best_score = config, score
    assert best is not None
    return best
