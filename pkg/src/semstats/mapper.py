"""Mapping networks from text embeddings to class statistics.

A 2-layer ReLU MLP maps a text embedding to a statistics vector (a mean or
a diagonal covariance, standardized by the caller). Training minimizes the
mean Euclidean-norm error plus weight decay with plain mini-batch gradient
descent + momentum, all in numpy with hand-written backprop: small enough
that autodiff frameworks would be overkill, and exact gradients are testable
against finite differences.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    DEFAULT_VAR_FLOOR,
    ClassStats,
    StandardizationParams,
    as_vector,
    zscore_invert,
)
from .errors import ConfigError, DataError, NumericalError

FSMP_MAGIC = b"FSMP"
FSMP_VERSION = 1


@dataclass(frozen=True)
class MapperParams:
    """Weights and biases of one 2-layer MLP."""

    W1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (out, hidden)
    b2: np.ndarray  # (out,)

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} has non-finite entries")
            object.__setattr__(self, name, a)
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise DataError("W1 and W2 must be matrices")
        if self.b1.shape != (self.W1.shape[0],) or self.b2.shape != (self.W2.shape[0],):
            raise DataError("bias shapes inconsistent with weight matrices")
        if self.W2.shape[1] != self.W1.shape[0]:
            raise DataError("W2 column count must equal W1 row count")

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.W2.shape[0]


@dataclass(frozen=True)
class MapperGradient:
    """Gradient of the loss, one array per parameter of MapperParams."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    epochs: int = 500
    batch_size: int = 64
    seed: int = 0
    hidden_dim: int = 256
    patience: int = 50
    momentum: float = 0.9
    squared_data_term: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be >= 0")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1")


@dataclass
class TrainReport:
    train_loss_curve: list[float] = field(default_factory=list)
    val_loss_curve: list[float] = field(default_factory=list)
    best_epoch: int = 0
    final_val_mse: float = float("nan")


def _stack_pairs(batch: Sequence) -> tuple[np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise DataError("empty batch")
    S = np.stack([as_vector(s, "text embedding") for s, _ in batch])
    T = np.stack([as_vector(t, "target") for _, t in batch])
    return S, T


def mapper_forward(params: MapperParams, s) -> np.ndarray:
    """W2 @ relu(W1 @ s + b1) + b2 for a single embedding."""
    v = as_vector(s, "text embedding")
    if v.shape[0] != params.in_dim:
        raise DataError(f"embedding has dim {v.shape[0]}, mapper expects {params.in_dim}")
    h = np.maximum(params.W1 @ v + params.b1, 0.0)
    return params.W2 @ h + params.b2


def forward_batch(params: MapperParams, S: np.ndarray) -> np.ndarray:
    """Forward pass on a stacked (n, in_dim) batch of embeddings."""
    if S.shape[1] != params.in_dim:
        raise DataError(f"batch has dim {S.shape[1]}, mapper expects {params.in_dim}")
    H = np.maximum(S @ params.W1.T + params.b1, 0.0)
    return H @ params.W2.T + params.b2


def _weight_penalty(params: MapperParams) -> float:
    # weights only, biases excluded
    return float(np.sum(params.W1 * params.W1) + np.sum(params.W2 * params.W2))


def mapper_loss(
    params: MapperParams,
    batch: Sequence,
    weight_decay: float,
    squared_data_term: bool = False,
) -> float:
    """Mean per-sample error norm plus weight decay.

    Data term is (1/N) sum_i ||g(s_i) - t_i||_2 (or the squared norm when
    ``squared_data_term``); the regularizer is weight_decay * ||W||^2 over
    the two weight matrices.
    """
    S, T = _stack_pairs(batch)
    R = forward_batch(params, S) - T
    norms_sq = np.sum(R * R, axis=1)
    data = float(np.mean(norms_sq) if squared_data_term else np.mean(np.sqrt(norms_sq)))
    return data + weight_decay * _weight_penalty(params)


def mapper_gradient(
    params: MapperParams,
    batch: Sequence,
    weight_decay: float,
    squared_data_term: bool = False,
) -> MapperGradient:
    """Exact gradient of :func:`mapper_loss` w.r.t. every parameter."""
    S, T = _stack_pairs(batch)
    n = S.shape[0]
    Pre = S @ params.W1.T + params.b1
    H = np.maximum(Pre, 0.0)
    R = H @ params.W2.T + params.b2 - T
    if squared_data_term:
        G_out = (2.0 / n) * R
    else:
        norms = np.linalg.norm(R, axis=1, keepdims=True)
        # subgradient 0 where the residual vanishes
        safe = np.where(norms > 0.0, norms, 1.0)
        G_out = np.where(norms > 0.0, R / safe, 0.0) / n
    dW2 = G_out.T @ H + 2.0 * weight_decay * params.W2
    db2 = G_out.sum(axis=0)
    G_pre = (G_out @ params.W2) * (Pre > 0.0)
    dW1 = G_pre.T @ S + 2.0 * weight_decay * params.W1
    db1 = G_pre.sum(axis=0)
    return MapperGradient(W1=dW1, b1=db1, W2=dW2, b2=db2)


def init_params(in_dim: int, hidden_dim: int, out_dim: int, rng: np.random.Generator) -> MapperParams:
    """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] for each layer."""
    r1 = 1.0 / np.sqrt(in_dim)
    r2 = 1.0 / np.sqrt(hidden_dim)
    return MapperParams(
        W1=rng.uniform(-r1, r1, size=(hidden_dim, in_dim)),
        b1=rng.uniform(-r1, r1, size=hidden_dim),
        W2=rng.uniform(-r2, r2, size=(out_dim, hidden_dim)),
        b2=rng.uniform(-r2, r2, size=out_dim),
    )


def train_mapper(
    train_pairs: Sequence,
    val_pairs: Sequence,
    config: TrainConfig,
) -> tuple[MapperParams, TrainReport]:
    """Fit one mapping network; returns the parameters of the best-validation epoch.

    Targets are expected pre-standardized (see core.zscore_fit). Training is
    deterministic given the config seed: initialization and epoch shuffling
    both draw from one seeded generator. Early stopping halts after
    ``patience`` epochs without validation improvement.
    """
    if len(train_pairs) == 0:
        raise DataError("empty training set")
    if len(val_pairs) == 0:
        raise DataError("empty validation set")
    S_tr, T_tr = _stack_pairs(train_pairs)
    S_val, T_val = _stack_pairs(val_pairs)

    rng = np.random.default_rng(config.seed)
    params = init_params(S_tr.shape[1], config.hidden_dim, T_tr.shape[1], rng)
    velocity = MapperGradient(
        W1=np.zeros_like(params.W1),
        b1=np.zeros_like(params.b1),
        W2=np.zeros_like(params.W2),
        b2=np.zeros_like(params.b2),
    )

    def full_loss(p: MapperParams, S, T, wd) -> float:
        # overflow here just means divergence, which the epoch check reports
        with np.errstate(over="ignore", invalid="ignore"):
            R = forward_batch(p, S) - T
            norms_sq = np.sum(R * R, axis=1)
            data = float(
                np.mean(norms_sq) if config.squared_data_term else np.mean(np.sqrt(norms_sq))
            )
            return data + wd * _weight_penalty(p)

    report = TrainReport()
    best_val = np.inf
    best_params = params
    stale = 0
    n = S_tr.shape[0]

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for start in range(0, n, config.batch_size):
                    idx = order[start : start + config.batch_size]
                    g = mapper_gradient(
                        params,
                        list(zip(S_tr[idx], T_tr[idx])),
                        config.weight_decay,
                        config.squared_data_term,
                    )
                    velocity = MapperGradient(
                        W1=config.momentum * velocity.W1 - config.learning_rate * g.W1,
                        b1=config.momentum * velocity.b1 - config.learning_rate * g.b1,
                        W2=config.momentum * velocity.W2 - config.learning_rate * g.W2,
                        b2=config.momentum * velocity.b2 - config.learning_rate * g.b2,
                    )
                    params = MapperParams(
                        W1=params.W1 + velocity.W1,
                        b1=params.b1 + velocity.b1,
                        W2=params.W2 + velocity.W2,
                        b2=params.b2 + velocity.b2,
                    )
        except DataError as exc:
            # parameters went non-finite mid-epoch
            raise NumericalError(f"training diverged at epoch {epoch}: {exc}") from exc

        train_loss = full_loss(params, S_tr, T_tr, config.weight_decay)
        val_loss = full_loss(params, S_val, T_val, 0.0)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            raise NumericalError(
                f"training diverged at epoch {epoch}: "
                f"train_loss={train_loss}, val_loss={val_loss}"
            )
        report.train_loss_curve.append(train_loss)
        report.val_loss_curve.append(val_loss)

        if val_loss < best_val:
            best_val = val_loss
            best_params = params
            report.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    from .metrics import mse  # local import to keep module dependencies one-way

    report.final_val_mse = mse(forward_batch(best_params, S_val), T_val)
    return best_params, report


def baseline_predictor(train_targets) -> np.ndarray:
    """Elementwise mean of the training targets; the constant predictor."""
    T = np.asarray(train_targets, dtype=np.float64)
    if T.ndim == 1:
        T = T.reshape(1, -1)
    if T.size == 0:
        raise DataError("empty target set")
    return T.mean(axis=0)


def predict_class_stats(
    mu_params: MapperParams,
    sigma_params: MapperParams,
    s,
    mu_std: StandardizationParams,
    sigma_std: StandardizationParams,
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> ClassStats:
    """Run both mappers on a text embedding and de-standardize the outputs.

    Variances are floored at ``var_floor``, so a prediction that lands
    negative after de-standardization still yields a valid Gaussian.
    """
    mean = zscore_invert(mu_std, mapper_forward(mu_params, s))
    var = zscore_invert(sigma_std, mapper_forward(sigma_params, s))
    return ClassStats(mean=mean, var_diag=np.maximum(var, var_floor))


@dataclass(frozen=True)
class MapperBundle:
    """A trained mean mapper + covariance mapper and their standardizations."""

    mu_params: MapperParams
    sigma_params: MapperParams
    mu_std: StandardizationParams
    sigma_std: StandardizationParams

    def predict(self, s, var_floor: float = DEFAULT_VAR_FLOOR) -> ClassStats:
        return predict_class_stats(
            self.mu_params, self.sigma_params, s, self.mu_std, self.sigma_std, var_floor
        )


# ---------------------------------------------------------------------------
# FSMP on-disk format: magic, version u32, three dim u32s, then W1, b1, W2, b2
# as little-endian float64 in row-major order. A JSON sidecar carries the
# training config, seed and standardization parameters.
# ---------------------------------------------------------------------------


def save_mapper_params(params: MapperParams, path) -> None:
    path = Path(path)
    header = FSMP_MAGIC + struct.pack(
        "<IIII", FSMP_VERSION, params.in_dim, params.hidden_dim, params.out_dim
    )
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f8").tobytes()
        for a in (params.W1, params.b1, params.W2, params.b2)
    )
    path.write_bytes(header + payload)


def load_mapper_params(path) -> MapperParams:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 20 or blob[:4] != FSMP_MAGIC:
        raise DataError(f"{path}: not an FSMP file (bad magic)")
    version, in_dim, hidden, out = struct.unpack("<IIII", blob[4:20])
    if version != FSMP_VERSION:
        raise DataError(f"{path}: unsupported FSMP version {version}")
    counts = [hidden * in_dim, hidden, out * hidden, out]
    expected = 20 + 8 * sum(counts)
    if len(blob) != expected:
        raise DataError(f"{path}: unexpected end of payload ({len(blob)} of {expected} bytes)")
    offset = 20
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset).astype(np.float64))
        offset += 8 * count
    return MapperParams(
        W1=arrays[0].reshape(hidden, in_dim),
        b1=arrays[1],
        W2=arrays[2].reshape(out, hidden),
        b2=arrays[3],
    )


def _std_to_json(std: StandardizationParams) -> dict:
    return {"center": std.center.tolist(), "scale": std.scale.tolist()}


def _std_from_json(d: dict) -> StandardizationParams:
    return StandardizationParams(center=np.array(d["center"]), scale=np.array(d["scale"]))


def save_bundle(bundle: MapperBundle, out_dir, metadata: dict | None = None) -> None:
    """Write mu.fsmp, sigma.fsmp and mappers.json into ``out_dir``.

    Output is byte-deterministic for identical inputs (sorted keys, no
    timestamps), so identical training runs produce identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_mapper_params(bundle.mu_params, out_dir / "mu.fsmp")
    save_mapper_params(bundle.sigma_params, out_dir / "sigma.fsmp")
    meta = {
        "format": "FSMP-bundle",
        "version": FSMP_VERSION,
        "mu_std": _std_to_json(bundle.mu_std),
        "sigma_std": _std_to_json(bundle.sigma_std),
    }
    if metadata:
        meta["metadata"] = metadata
    (out_dir / "mappers.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def load_bundle(in_dir) -> tuple[MapperBundle, dict]:
    """Read a bundle directory written by :func:`save_bundle`."""
    in_dir = Path(in_dir)
    meta_path = in_dir / "mappers.json"
    if not meta_path.exists():
        raise DataError(f"missing mapper metadata file {meta_path}")
    meta = json.loads(meta_path.read_text())
    bundle = MapperBundle(
        mu_params=load_mapper_params(in_dir / "mu.fsmp"),
        sigma_params=load_mapper_params(in_dir / "sigma.fsmp"),
        mu_std=_std_from_json(meta["mu_std"]),
        sigma_std=_std_from_json(meta["sigma_std"]),
    )
    return bundle, meta.get("metadata", {})
