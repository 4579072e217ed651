"""Episodic protocol engine.

Samples one-class and multi-class few-shot tasks from a dataset of
per-class feature sets, builds the per-class Gaussian models for each
method variant (Baseline / M / C / M&C), and aggregates metrics with
paired per-episode values so variant deltas are paired statistics.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .adapt import AdaptConfig, HyperGrid, default_grid, interpolate_mean, shrink_cov
from .classify import ClassModel
from .core import ClassStats, as_feature_matrix, as_vector
from .errors import ConfigError, DataError
from .mapper import MapperBundle
from .metrics import accuracy, auroc, confidence_interval

VALID_SPLITS = ("base", "val", "test")

# Validation shots per class held out for (alpha, beta) selection: min(k, 4).
# With a single shot, that shot doubles as the validation example.
MAX_VAL_SHOTS = 4


@dataclass(frozen=True)
class DatasetClass:
    """One class: label, its feature rows and one text embedding."""

    label: str
    features: np.ndarray
    text: np.ndarray
    split: str

    def __post_init__(self):
        object.__setattr__(self, "features", as_feature_matrix(self.features))
        object.__setattr__(self, "text", as_vector(self.text, f"text embedding of {self.label!r}"))
        if self.split not in VALID_SPLITS:
            raise DataError(f"class {self.label!r}: unknown split tag {self.split!r}")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class FewShotDataset:
    classes: tuple[DatasetClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if len(self.classes) == 0:
            raise DataError("dataset has no classes")
        labels = [c.label for c in self.classes]
        if len(set(labels)) != len(labels):
            raise DataError("duplicate class labels")
        d = self.classes[0].features.shape[1]
        ds = self.classes[0].text.shape[0]
        for c in self.classes:
            if c.features.shape[1] != d:
                raise DataError(f"class {c.label!r}: feature dim {c.features.shape[1]} != {d}")
            if c.text.shape[0] != ds:
                raise DataError(f"class {c.label!r}: text dim {c.text.shape[0]} != {ds}")

    @property
    def feat_dim(self) -> int:
        return self.classes[0].features.shape[1]

    @property
    def text_dim(self) -> int:
        return self.classes[0].text.shape[0]

    def split_classes(self, split: str) -> tuple[DatasetClass, ...]:
        if split not in VALID_SPLITS:
            raise DataError(f"unknown split {split!r}")
        return tuple(c for c in self.classes if c.split == split)

    def by_label(self, label: str) -> DatasetClass:
        for c in self.classes:
            if c.label == label:
                return c
        raise DataError(f"no class labelled {label!r}")


@dataclass(frozen=True)
class MethodVariant:
    """Which statistics come from text: neither (Baseline), M, C or M&C."""

    name: str
    use_text_mean: bool
    use_text_cov: bool


BASELINE = MethodVariant("Baseline", use_text_mean=False, use_text_cov=False)
MEAN_FROM_TEXT = MethodVariant("M", use_text_mean=True, use_text_cov=False)
COV_FROM_TEXT = MethodVariant("C", use_text_mean=False, use_text_cov=True)
MEAN_AND_COV = MethodVariant("M&C", use_text_mean=True, use_text_cov=True)

_VARIANTS_BY_KEY = {
    "baseline": BASELINE,
    "m": MEAN_FROM_TEXT,
    "c": COV_FROM_TEXT,
    "mc": MEAN_AND_COV,
    "m&c": MEAN_AND_COV,
}


def parse_variant(name: str) -> MethodVariant:
    try:
        return _VARIANTS_BY_KEY[name.strip().lower()]
    except KeyError:
        raise ConfigError(
            f"unknown variant {name!r}; choose from baseline, m, c, mc"
        ) from None


@dataclass(frozen=True)
class Episode:
    """One sampled few-shot task.

    Support, validation and query rows are disjoint index sets within each
    class (except k = 1, where the single support shot doubles as the
    validation example). For one-class episodes ``class_labels`` holds the
    single target class and ``query_labels`` is the in-class flag; for
    multi-class episodes ``query_labels`` indexes into ``class_labels``.
    """

    kind: str
    class_labels: tuple[str, ...]
    support_indices: tuple[np.ndarray, ...]
    support_features: tuple[np.ndarray, ...]
    val_indices: tuple[np.ndarray, ...]
    val_features: tuple[np.ndarray, ...]
    query_features: np.ndarray
    query_labels: np.ndarray
    query_src_labels: tuple[str, ...]
    query_src_rows: np.ndarray
    class_text: np.ndarray
    k: int
    seed: int
    # one-class only: out-of-class rows scored during hyperparameter selection
    val_neg_features: np.ndarray | None = None
    val_neg_sources: tuple[tuple[str, int], ...] = ()

    @property
    def n_way(self) -> int:
        return len(self.class_labels)


def _rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def _val_shot_count(k: int) -> int:
    return min(k, MAX_VAL_SHOTS)


def sample_oneclass_episode(
    ds: FewShotDataset,
    k: int,
    n_queries: int,
    rng_seed: int,
    max_retries: int = 100,
) -> Episode:
    """One target class, k support shots, queries in-class with probability 0.5.

    Out-of-class queries are drawn uniformly over the other test classes and
    then uniformly over rows. Deterministic given the seed.
    """
    if k < 0 or n_queries < 1:
        raise ConfigError("need k >= 0 and n_queries >= 1")
    test = ds.split_classes("test")
    if len(test) < 2:
        raise DataError("one-class episodes need at least 2 test classes")
    rng = _rng_for(rng_seed)

    v = _val_shot_count(k)
    extra_val = v if k >= 2 else 0  # k == 1 reuses the shot; k == 0 has no val
    needed = k + extra_val + 1  # at least one row left for in-class queries

    target = None
    for _ in range(max_retries):
        cand = test[int(rng.integers(len(test)))]
        if cand.n_rows >= needed:
            target = cand
            break
    if target is None:
        raise DataError(
            f"no test class with >= {needed} rows found in {max_retries} draws"
        )

    perm = rng.permutation(target.n_rows)
    support_idx = np.sort(perm[:k])
    if k == 1:
        val_idx = support_idx.copy()
    else:
        val_idx = np.sort(perm[k : k + extra_val])
    pool = np.sort(perm[k + extra_val :])  # in-class query pool

    others = [c for c in test if c.label != target.label]

    # validation negatives (for selection scoring), one per positive val shot
    val_neg_sources: list[tuple[str, int]] = []
    blocked: dict[str, set[int]] = {}
    for _ in range(len(val_idx)):
        oc = others[int(rng.integers(len(others)))]
        row = int(rng.integers(oc.n_rows))
        val_neg_sources.append((oc.label, row))
        blocked.setdefault(oc.label, set()).add(row)

    out_pools = {
        c.label: np.array(sorted(set(range(c.n_rows)) - blocked.get(c.label, set())))
        for c in others
    }
    usable_others = [c for c in others if out_pools[c.label].size > 0]
    if not usable_others:
        raise DataError("no out-of-class rows available for queries")

    q_rows = np.empty((n_queries, ds.feat_dim))
    q_labels = np.empty(n_queries, dtype=np.int64)
    q_src_labels: list[str] = []
    q_src_rows = np.empty(n_queries, dtype=np.int64)
    for i in range(n_queries):
        if rng.random() < 0.5:
            row = int(pool[int(rng.integers(pool.size))])
            q_rows[i] = target.features[row]
            q_labels[i] = 1
            q_src_labels.append(target.label)
        else:
            oc = usable_others[int(rng.integers(len(usable_others)))]
            pool_oc = out_pools[oc.label]
            row = int(pool_oc[int(rng.integers(pool_oc.size))])
            q_rows[i] = oc.features[row]
            q_labels[i] = 0
            q_src_labels.append(oc.label)
        q_src_rows[i] = row

    val_neg = (
        np.stack([ds.by_label(lbl).features[row] for lbl, row in val_neg_sources])
        if val_neg_sources
        else np.empty((0, ds.feat_dim))
    )
    return Episode(
        kind="oneclass",
        class_labels=(target.label,),
        support_indices=(support_idx,),
        support_features=(target.features[support_idx],),
        val_indices=(val_idx,),
        val_features=(target.features[val_idx],),
        query_features=q_rows,
        query_labels=q_labels,
        query_src_labels=tuple(q_src_labels),
        query_src_rows=q_src_rows,
        class_text=target.text.reshape(1, -1),
        k=k,
        seed=rng_seed,
        val_neg_features=val_neg,
        val_neg_sources=tuple(val_neg_sources),
    )


def sample_multiclass_episode(
    ds: FewShotDataset,
    n_way: int,
    k_shot: int,
    q_per_class: int,
    rng_seed: int,
) -> Episode:
    """n_way distinct test classes with disjoint support/val/query rows."""
    if n_way < 2 or k_shot < 0 or q_per_class < 1:
        raise ConfigError("need n_way >= 2, k_shot >= 0, q_per_class >= 1")
    test = ds.split_classes("test")
    rng = _rng_for(rng_seed)

    v = _val_shot_count(k_shot)
    extra_val = v if k_shot >= 2 else 0
    needed = k_shot + extra_val + q_per_class
    eligible = [c for c in test if c.n_rows >= needed]
    if len(eligible) < n_way:
        deficient = sorted(c.label for c in test if c.n_rows < needed)
        raise DataError(
            f"cannot sample {n_way}-way episode with k={k_shot}: only "
            f"{len(eligible)} classes have >= {needed} rows "
            f"(deficient: {', '.join(deficient) or 'none'})"
        )
    chosen = [eligible[i] for i in rng.choice(len(eligible), size=n_way, replace=False)]

    support_idx, support_feat = [], []
    val_idx, val_feat = [], []
    q_rows, q_labels, q_src_labels, q_src_rows = [], [], [], []
    for ci, cls in enumerate(chosen):
        perm = rng.permutation(cls.n_rows)
        s_idx = np.sort(perm[:k_shot])
        if k_shot == 1:
            v_idx = s_idx.copy()
        else:
            v_idx = np.sort(perm[k_shot : k_shot + extra_val])
        queries = np.sort(perm[k_shot + extra_val : k_shot + extra_val + q_per_class])
        support_idx.append(s_idx)
        support_feat.append(cls.features[s_idx])
        val_idx.append(v_idx)
        val_feat.append(cls.features[v_idx])
        q_rows.append(cls.features[queries])
        q_labels.extend([ci] * q_per_class)
        q_src_labels.extend([cls.label] * q_per_class)
        q_src_rows.extend(queries.tolist())

    return Episode(
        kind="multiclass",
        class_labels=tuple(c.label for c in chosen),
        support_indices=tuple(support_idx),
        support_features=tuple(support_feat),
        val_indices=tuple(val_idx),
        val_features=tuple(val_feat),
        query_features=np.concatenate(q_rows, axis=0),
        query_labels=np.array(q_labels, dtype=np.int64),
        query_src_labels=tuple(q_src_labels),
        query_src_rows=np.array(q_src_rows, dtype=np.int64),
        class_text=np.stack([c.text for c in chosen]),
        k=k_shot,
        seed=rng_seed,
    )


def build_models(
    episode: Episode,
    variant: MethodVariant,
    adapt: AdaptConfig,
    mappers: MapperBundle | None = None,
    text_stats: dict[str, ClassStats] | None = None,
) -> list[ClassModel]:
    """Per-class Gaussians for one episode under one method variant.

    Means blend the empirical support mean with the text prediction by
    alpha (masked off unless the variant uses the text mean, forced to 1
    when there are no shots); variances shrink the text prediction toward
    the identity by beta (masked off unless the variant uses the text
    covariance). The Baseline therefore never touches the mappers.
    """
    needs_text = variant.use_text_mean or variant.use_text_cov
    models = []
    for i, label in enumerate(episode.class_labels):
        k = len(episode.support_indices[i])
        if k == 0 and not variant.use_text_mean:
            raise DataError("zero-shot requires text mean")
        text = None
        if needs_text:
            if text_stats is not None:
                text = text_stats[label]
            elif mappers is not None:
                text = mappers.predict(episode.class_text[i])
            else:
                raise DataError(f"variant {variant.name} needs trained mappers")

        if k == 0:
            mean = text.mean.copy()
        else:
            empirical = episode.support_features[i].mean(axis=0)
            eff_alpha = adapt.alpha if variant.use_text_mean else 0.0
            mean = interpolate_mean(empirical, text.mean if text is not None else empirical, eff_alpha)

        eff_beta = adapt.beta if variant.use_text_cov else 0.0
        if eff_beta == 0.0:
            var = np.ones(episode.query_features.shape[1])
        else:
            var = shrink_cov(text.var_diag, eff_beta)
        models.append(ClassModel(stats=ClassStats(mean=mean, var_diag=var), label=label))
    return models


# --- batched scoring -------------------------------------------------------
# Vectorized twins of classify.oneclass_score / classify.classify; equality
# with the scalar versions is pinned by tests.


def _batch_mahalanobis_sq(X: np.ndarray, models: Sequence[ClassModel]) -> np.ndarray:
    means = np.stack([m.stats.mean for m in models])
    variances = np.stack([m.stats.var_diag for m in models])
    diff = X[:, None, :] - means[None, :, :]
    return np.sum(diff * diff / variances[None, :, :], axis=2)


def _batch_oneclass_scores(X: np.ndarray, model: ClassModel) -> np.ndarray:
    m2 = _batch_mahalanobis_sq(X, [model])[:, 0]
    d = model.stats.dim
    log_det = float(np.sum(np.log(model.stats.var_diag)))
    return -0.5 * (d * np.log(2.0 * np.pi) + log_det + m2)


def _batch_classify(X: np.ndarray, models: Sequence[ClassModel]) -> np.ndarray:
    return np.argmin(_batch_mahalanobis_sq(X, models), axis=1)


def score_episode(
    episode: Episode,
    variant: MethodVariant,
    adapt: AdaptConfig,
    mappers: MapperBundle | None = None,
    text_stats: dict[str, ClassStats] | None = None,
) -> float:
    """Episode metric: AUROC (one-class) or accuracy (multi-class) on queries."""
    models = build_models(episode, variant, adapt, mappers, text_stats)
    if episode.kind == "oneclass":
        scores = _batch_oneclass_scores(episode.query_features, models[0])
        return auroc(scores, episode.query_labels)
    preds = _batch_classify(episode.query_features, models)
    return accuracy(preds, episode.query_labels)


def _val_score(
    episode: Episode,
    variant: MethodVariant,
    adapt: AdaptConfig,
    text_stats: dict[str, ClassStats] | None,
) -> float:
    """Score one candidate (alpha, beta) on the episode's held-out val rows."""
    models = build_models(episode, variant, adapt, None, text_stats)
    if episode.kind == "oneclass":
        pos = episode.val_features[0]
        neg = episode.val_neg_features
        X = np.concatenate([pos, neg], axis=0)
        y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        scores = _batch_oneclass_scores(X, models[0])
        return auroc(scores, y)
    X = np.concatenate(episode.val_features, axis=0)
    y = np.concatenate(
        [np.full(len(f), i, dtype=np.int64) for i, f in enumerate(episode.val_features)]
    )
    preds = _batch_classify(X, models)
    return accuracy(preds, y)


def select_for_episode(
    episode: Episode,
    variant: MethodVariant,
    grid: HyperGrid,
    text_stats: dict[str, ClassStats] | None,
) -> AdaptConfig:
    """Grid-select (alpha, beta) on this episode's validation rows.

    Coefficients a variant masks off are pinned to 0 up front; by the
    smaller-alpha/smaller-beta tie-break this matches selection over the
    full grid while skipping redundant cells.
    """
    from .adapt import select_hyperparams

    masked = HyperGrid(
        alphas=grid.alphas if variant.use_text_mean else (0.0,),
        betas=grid.betas if variant.use_text_cov else (0.0,),
    )
    return select_hyperparams(
        masked,
        [episode],
        lambda ep, cfg: _val_score(ep, variant, cfg, text_stats),
    )


@dataclass(frozen=True)
class ProtocolConfig:
    """What to run: task kind, shot counts, episode shape and adaptation mode."""

    kind: str  # "oneclass" | "multiclass"
    shots: tuple[int, ...]
    n_queries: int = 100  # one-class queries per episode
    n_way: int = 20  # multi-class
    q_per_class: int = 15  # multi-class
    selection: str = "grid"  # "grid" | "fixed"
    grid: HyperGrid = field(default_factory=default_grid)
    fixed: AdaptConfig | None = None

    def __post_init__(self):
        if self.kind not in ("oneclass", "multiclass"):
            raise ConfigError(f"unknown protocol kind {self.kind!r}")
        if len(self.shots) == 0:
            raise ConfigError("need at least one shot count")
        if any(k < 0 for k in self.shots):
            raise ConfigError("shot counts must be >= 0")
        if self.selection not in ("grid", "fixed"):
            raise ConfigError(f"unknown selection mode {self.selection!r}")
        if self.selection == "fixed" and self.fixed is None:
            raise ConfigError("fixed selection mode needs an (alpha, beta) pair")


@dataclass
class ReportRow:
    variant: str
    k: int
    metric: float | None
    ci: float | None
    n_episodes: int
    seed: int
    error: str | None = None


@dataclass
class ProtocolReport:
    kind: str
    rows: list[ReportRow]
    deltas: list[ReportRow]
    per_episode: dict[tuple[str, int], np.ndarray]
    config: dict

    def row(self, variant: str, k: int) -> ReportRow:
        for r in self.rows:
            if r.variant == variant and r.k == k:
                return r
        raise KeyError((variant, k))

    def delta(self, variant: str, k: int) -> ReportRow:
        for r in self.deltas:
            if r.variant == variant and r.k == k:
                return r
        raise KeyError((variant, k))

    @staticmethod
    def _write_rows(path, rows: list[ReportRow]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "k", "metric", "ci", "n_episodes", "seed", "error"])
            for r in rows:
                w.writerow(
                    [
                        r.variant,
                        r.k,
                        "" if r.metric is None else repr(r.metric),
                        "" if r.ci is None else repr(r.ci),
                        r.n_episodes,
                        r.seed,
                        r.error or "",
                    ]
                )

    def to_csv(self, path) -> None:
        self._write_rows(path, self.rows)

    def deltas_to_csv(self, path) -> None:
        self._write_rows(path, self.deltas)

    def to_json(self, path) -> None:
        def row_dict(r: ReportRow) -> dict:
            return {
                "variant": r.variant,
                "k": r.k,
                "metric": r.metric,
                "ci": r.ci,
                "n_episodes": r.n_episodes,
                "seed": r.seed,
                "error": r.error,
                "degenerate_ci": r.n_episodes == 1,
            }

        doc = {
            "kind": self.kind,
            "config": self.config,
            "rows": [row_dict(r) for r in self.rows],
            "deltas": [row_dict(r) for r in self.deltas],
            "per_episode": {
                f"{variant}@{k}": values.tolist()
                for (variant, k), values in sorted(self.per_episode.items())
            },
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _episode_seed(master_seed: int, k: int, index: int) -> int:
    # stable derivation so every variant sees byte-identical episodes and
    # parallel evaluation order cannot change results
    return int(
        np.random.SeedSequence([master_seed, k, index]).generate_state(1, np.uint64)[0]
    )


def _resolve_adapt(
    episode: Episode,
    variant: MethodVariant,
    config: ProtocolConfig,
    text_stats: dict[str, ClassStats] | None,
) -> AdaptConfig:
    if config.selection == "fixed":
        return config.fixed
    if episode.k == 0:
        # no validation data exists at zero shots; trust the text covariance
        # fully (alpha is forced to 1 downstream regardless)
        return AdaptConfig(alpha=1.0, beta=1.0)
    return select_for_episode(episode, variant, config.grid, text_stats)


def run_protocol(
    ds: FewShotDataset,
    config: ProtocolConfig,
    variants: Sequence[MethodVariant],
    n_episodes: int,
    seed: int,
    mappers: MapperBundle | None = None,
    threads: int = 1,
) -> ProtocolReport:
    """Run every (variant, k) cell over paired episodes and aggregate.

    For a fixed master seed every variant sees identical episodes, so the
    per-episode metric arrays support paired deltas against the Baseline.
    Infeasible cells (for example zero shots without a text mean) become
    error rows and the run continues.
    """
    if n_episodes < 1:
        raise ConfigError("n_episodes must be >= 1")
    needs_text = any(v.use_text_mean or v.use_text_cov for v in variants)
    if needs_text and mappers is None:
        raise DataError("requested variants need trained mappers")

    text_stats = None
    if needs_text:
        text_stats = {c.label: mappers.predict(c.text) for c in ds.split_classes("test")}

    rows: list[ReportRow] = []
    deltas: list[ReportRow] = []
    per_episode: dict[tuple[str, int], np.ndarray] = {}

    for k in config.shots:
        try:
            episodes = [
                _sample(ds, config, k, _episode_seed(seed, k, i)) for i in range(n_episodes)
            ]
        except (DataError, ConfigError) as exc:
            for variant in variants:
                rows.append(ReportRow(variant.name, k, None, None, 0, seed, str(exc)))
            continue

        feasible = []
        for variant in variants:
            if k == 0 and not variant.use_text_mean:
                rows.append(
                    ReportRow(variant.name, k, None, None, 0, seed, "zero-shot requires text mean")
                )
            else:
                feasible.append(variant)

        def eval_one(episode: Episode) -> dict[str, float]:
            out = {}
            for variant in feasible:
                adapt = _resolve_adapt(episode, variant, config, text_stats)
                out[variant.name] = score_episode(episode, variant, adapt, None, text_stats)
            return out

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(eval_one, episodes))
        else:
            results = [eval_one(ep) for ep in episodes]

        for variant in feasible:
            values = np.array([r[variant.name] for r in results])
            per_episode[(variant.name, k)] = values
            mean, ci = confidence_interval(values)
            rows.append(ReportRow(variant.name, k, mean, ci, n_episodes, seed))

        if any(v.name == BASELINE.name for v in feasible):
            base = per_episode[(BASELINE.name, k)]
            for variant in feasible:
                if variant.name == BASELINE.name:
                    continue
                dmean, dci = confidence_interval(per_episode[(variant.name, k)] - base)
                deltas.append(ReportRow(variant.name, k, dmean, dci, n_episodes, seed))

    return ProtocolReport(
        kind=config.kind,
        rows=rows,
        deltas=deltas,
        per_episode=per_episode,
        config=_config_dict(config, n_episodes, seed, threads),
    )


def _sample(ds: FewShotDataset, config: ProtocolConfig, k: int, ep_seed: int) -> Episode:
    if config.kind == "oneclass":
        return sample_oneclass_episode(ds, k, config.n_queries, ep_seed)
    return sample_multiclass_episode(ds, config.n_way, k, config.q_per_class, ep_seed)


def _config_dict(config: ProtocolConfig, n_episodes: int, seed: int, threads: int) -> dict:
    return {
        "kind": config.kind,
        "shots": list(config.shots),
        "n_queries": config.n_queries,
        "n_way": config.n_way,
        "q_per_class": config.q_per_class,
        "selection": config.selection,
        "grid": None
        if config.selection == "fixed"
        else {"alphas": list(config.grid.alphas), "betas": list(config.grid.betas)},
        "fixed": None
        if config.fixed is None
        else {"alpha": config.fixed.alpha, "beta": config.fixed.beta},
        "n_episodes": n_episodes,
        "seed": seed,
        "threads": threads,
    }
