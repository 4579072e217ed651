"""Command-line driver wiring the library into reproducible experiments.

Subcommands: synth-gen, train-mappers, eval-mse, eval-oneclass,
eval-multiclass. Every run is deterministic given its flags; every report
embeds the resolved configuration. Exit codes: 0 success, 2 config error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io as fsio
from .adapt import AdaptConfig, HyperGrid, default_grid
from .core import empirical_class_stats, zscore_apply, zscore_fit
from .errors import ConfigError, DataError, NumericalError, SemstatsError
from .mapper import (
    MapperBundle,
    TrainConfig,
    baseline_predictor,
    forward_batch,
    load_bundle,
    save_bundle,
    train_mapper,
)
from .metrics import confidence_interval, mse, roc_points
from .synth import SynthConfig, generate_world
from .tasks import (
    ProtocolConfig,
    build_models,
    parse_variant,
    run_protocol,
    sample_oneclass_episode,
    _batch_oneclass_scores,
    _resolve_adapt,
)


def _parse_kv_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; '#' starts a comment."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _synth_config_from_file(path, overrides: dict) -> SynthConfig:
    fields = {
        "n_classes": int,
        "n_base": int,
        "n_val": int,
        "n_test": int,
        "feat_dim": int,
        "text_dim": int,
        "samples_per_class": int,
        "mean_map_noise": float,
        "var_map_noise": float,
        "domain_shift": float,
        "seed": int,
    }
    kwargs = {}
    if path is not None:
        for key, value in _parse_kv_config(path).items():
            if key not in fields:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            try:
                kwargs[key] = fields[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}: key {key!r}: {exc}") from exc
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return SynthConfig(**kwargs)


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _alpha_beta(text: str) -> AdaptConfig:
    parts = _comma_floats(text)
    if len(parts) != 2:
        raise ConfigError(f"expected 'alpha,beta', got {text!r}")
    return AdaptConfig(alpha=parts[0], beta=parts[1])


def _write_json(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


# --- synth-gen --------------------------------------------------------------


def cmd_synth_gen(args) -> int:
    config = _synth_config_from_file(
        args.config, {"seed": args.seed, "domain_shift": args.domain_shift}
    )
    ds, _truth = generate_world(config)
    fsio.write_dataset(ds, args.out, provenance={"generator": "synth", **asdict(config)})
    print(f"wrote {len(ds.classes)} classes ({ds.feat_dim}-d features) to {args.out}")
    return 0


# --- train-mappers ----------------------------------------------------------


def _class_targets(classes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    stats = [empirical_class_stats(c.features) for c in classes]
    means = np.stack([s.mean for s in stats])
    variances = np.stack([s.var_diag for s in stats])
    texts = np.stack([c.text for c in classes])
    return texts, means, variances


def cmd_train_mappers(args) -> int:
    ds = fsio.read_dataset(args.data)
    base = ds.split_classes("base")
    val = ds.split_classes("val")
    if len(base) < 2:
        raise DataError("need at least 2 base classes to fit standardization")
    if len(val) < 1:
        raise DataError("need at least 1 val class for early stopping")

    base_texts, base_means, base_vars = _class_targets(base)
    val_texts, val_means, val_vars = _class_targets(val)
    mu_std = zscore_fit(base_means)
    sigma_std = zscore_fit(base_vars)

    config = TrainConfig(
        learning_rate=args.lr,
        weight_decay=args.wd,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        hidden_dim=args.hidden,
        patience=args.patience,
        squared_data_term=args.squared_data_term,
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def pairs(texts, targets, std):
        return list(zip(texts, zscore_apply(std, targets)))

    try:
        mu_params, mu_report = train_mapper(
            pairs(base_texts, base_means, mu_std),
            pairs(val_texts, val_means, mu_std),
            config,
        )
        sigma_config = TrainConfig(**{**asdict(config), "seed": config.seed + 1})
        sigma_params, sigma_report = train_mapper(
            pairs(base_texts, base_vars, sigma_std),
            pairs(val_texts, val_vars, sigma_std),
            sigma_config,
        )
    except NumericalError as exc:
        _write_json(out_dir / "failure.json", {"error": str(exc)})
        raise

    bundle = MapperBundle(
        mu_params=mu_params, sigma_params=sigma_params, mu_std=mu_std, sigma_std=sigma_std
    )
    metadata = {
        "data": str(args.data),
        "config": asdict(config),
        "sigma_seed": sigma_config.seed,
        "n_base_classes": len(base),
        "n_val_classes": len(val),
    }
    save_bundle(bundle, out_dir, metadata)
    _write_json(
        out_dir / "train_report.json",
        {
            "config": asdict(config),
            "mu": asdict(mu_report),
            "sigma": asdict(sigma_report),
        },
    )
    print(
        f"mean mapper:       best epoch {mu_report.best_epoch}, "
        f"val MSE {mu_report.final_val_mse:.4f}"
    )
    print(
        f"covariance mapper: best epoch {sigma_report.best_epoch}, "
        f"val MSE {sigma_report.final_val_mse:.4f}"
    )
    return 0


# --- eval-mse ---------------------------------------------------------------


def cmd_eval_mse(args) -> int:
    train_ds = fsio.read_dataset(args.data)
    eval_ds = fsio.read_dataset(args.cross_domain_data) if args.cross_domain_data else train_ds
    eval_classes = eval_ds.split_classes(args.split)
    if len(eval_classes) < 1:
        raise DataError(f"no classes in split {args.split!r}")
    base = train_ds.split_classes("base")
    if len(base) < 2:
        raise DataError("training data needs at least 2 base classes")

    base_texts, base_means, base_vars = _class_targets(base)
    eval_texts, eval_means, eval_vars = _class_targets(eval_classes)

    per_head: dict[str, dict[str, list[float]]] = {
        "mean": {"baseline": [], "trained": []},
        "cov": {"baseline": [], "trained": []},
    }
    for bundle_dir in args.mappers:
        bundle, _meta = load_bundle(bundle_dir)
        for head, params, std, base_t, eval_t in (
            ("mean", bundle.mu_params, bundle.mu_std, base_means, eval_means),
            ("cov", bundle.sigma_params, bundle.sigma_std, base_vars, eval_vars),
        ):
            z_base = zscore_apply(std, base_t)
            z_eval = zscore_apply(std, eval_t)
            constant = baseline_predictor(z_base)
            per_head[head]["baseline"].append(
                mse(np.tile(constant, (len(z_eval), 1)), z_eval)
            )
            per_head[head]["trained"].append(mse(forward_batch(params, eval_texts), z_eval))

    rows = []
    for head in ("mean", "cov"):
        for model in ("baseline", "trained"):
            mean, ci = confidence_interval(per_head[head][model])
            rows.append(
                {
                    "head": head,
                    "model": model,
                    "mse": mean,
                    "ci": ci,
                    "n_mappers": len(args.mappers),
                }
            )
            print(f"{head:>4} {model:<8} MSE {mean:.4f} +- {ci:.4f}")

    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "mse.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["head", "model", "mse", "ci", "n_mappers"])
            for r in rows:
                w.writerow([r["head"], r["model"], repr(r["mse"]), repr(r["ci"]), r["n_mappers"]])
        _write_json(
            out_dir / "mse.json",
            {
                "config": {
                    "data": str(args.data),
                    "cross_domain_data": str(args.cross_domain_data)
                    if args.cross_domain_data
                    else None,
                    "split": args.split,
                    "mappers": [str(m) for m in args.mappers],
                },
                "rows": rows,
            },
        )
    return 0


# --- eval-oneclass / eval-multiclass ----------------------------------------


def _protocol_config(args, kind: str) -> ProtocolConfig:
    grid = (
        HyperGrid(alphas=_comma_floats(args.grid), betas=_comma_floats(args.grid))
        if args.grid
        else default_grid()
    )
    fixed = _alpha_beta(args.fixed_alpha_beta) if args.fixed_alpha_beta else None
    if getattr(args, "select_grid", False):
        fixed = None
    selection = "fixed" if fixed is not None else "grid"
    kwargs = dict(
        kind=kind,
        shots=_comma_ints(args.shots),
        selection=selection,
        grid=grid,
        fixed=fixed,
    )
    if kind == "oneclass":
        kwargs["n_queries"] = args.queries
    else:
        kwargs["n_way"] = args.n_way
        kwargs["q_per_class"] = args.q_per_class
    return ProtocolConfig(**kwargs)


def _run_eval(args, kind: str) -> int:
    ds = fsio.read_dataset(args.data)
    variants = [parse_variant(v) for v in args.variants.split(",")]
    mappers = None
    if args.mappers:
        mappers, _meta = load_bundle(args.mappers)
    config = _protocol_config(args, kind)
    report = run_protocol(
        ds, config, variants, args.episodes, args.seed, mappers=mappers, threads=args.threads
    )

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_csv(out_dir / "report.csv")
    report.deltas_to_csv(out_dir / "deltas.csv")
    report.to_json(out_dir / "report.json")

    for row in report.rows:
        if row.error:
            print(f"{row.variant:>8} k={row.k:<3} ERROR: {row.error}")
        else:
            print(
                f"{row.variant:>8} k={row.k:<3} "
                f"{'AUROC' if kind == 'oneclass' else 'acc'} "
                f"{row.metric:.4f} +- {row.ci:.4f}"
            )
    if kind == "oneclass" and args.roc_csv:
        _write_roc_csv(ds, config, variants, args.episodes, args.seed, mappers, args.roc_csv)
    return 0


def _write_roc_csv(ds, config, variants, n_episodes, seed, mappers, path) -> None:
    """Pooled (FPR, TPR) points per (variant, k) over the run's episodes."""
    from .tasks import _episode_seed

    text_stats = None
    if mappers is not None:
        text_stats = {c.label: mappers.predict(c.text) for c in ds.split_classes("test")}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", "k", "fpr", "tpr"])
        for k in config.shots:
            episodes = []
            try:
                episodes = [
                    sample_oneclass_episode(ds, k, config.n_queries, _episode_seed(seed, k, i))
                    for i in range(n_episodes)
                ]
            except (DataError, ConfigError):
                continue
            for variant in variants:
                if k == 0 and not variant.use_text_mean:
                    continue
                scores, labels = [], []
                for ep in episodes:
                    adapt = _resolve_adapt(ep, variant, config, text_stats)
                    models = build_models(ep, variant, adapt, None, text_stats)
                    scores.append(_batch_oneclass_scores(ep.query_features, models[0]))
                    labels.append(ep.query_labels)
                fpr, tpr = roc_points(np.concatenate(scores), np.concatenate(labels))
                for f, t in zip(fpr, tpr):
                    w.writerow([variant.name, k, repr(float(f)), repr(float(t))])


def cmd_eval_oneclass(args) -> int:
    return _run_eval(args, "oneclass")


def cmd_eval_multiclass(args) -> int:
    return _run_eval(args, "multiclass")


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="semstats",
        description="Predict class statistics from text embeddings and evaluate "
        "few-shot Mahalanobis classifiers.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("synth-gen", help="generate a synthetic world file")
    g.add_argument("--config", default=None, help="flat key=value config file")
    g.add_argument("--out", required=True, help="output .fsts path")
    g.add_argument("--seed", type=int, default=None, help="override config seed")
    g.add_argument(
        "--domain-shift", type=float, default=None, help="override config domain_shift"
    )
    g.set_defaults(func=cmd_synth_gen)

    t = sub.add_parser("train-mappers", help="train mean and covariance mappers")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="output bundle directory")
    t.add_argument("--hidden", type=int, default=256)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--wd", type=float, default=1e-4)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--patience", type=int, default=50)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--squared-data-term", action="store_true")
    t.set_defaults(func=cmd_train_mappers)

    m = sub.add_parser("eval-mse", help="standardized MSE of baseline vs trained mappers")
    m.add_argument("--data", required=True, help="training data (defines the baseline)")
    m.add_argument("--mappers", nargs="+", required=True, help="one or more bundle dirs")
    m.add_argument("--split", choices=["base", "val", "test"], default="val")
    m.add_argument("--cross-domain-data", default=None)
    m.add_argument("--out", default=None, help="directory for mse.csv / mse.json")
    m.set_defaults(func=cmd_eval_mse)

    for kind in ("oneclass", "multiclass"):
        e = sub.add_parser(f"eval-{kind}", help=f"episodic {kind} protocol")
        e.add_argument("--data", required=True)
        e.add_argument("--mappers", default=None, help="bundle dir (needed for text variants)")
        e.add_argument("--variants", default="baseline,m,c,mc")
        e.add_argument("--shots", default="1,2,4,8,16")
        e.add_argument("--episodes", type=int, default=2000 if kind == "oneclass" else 1000)
        e.add_argument("--seed", type=int, default=0)
        e.add_argument("--grid", default=None, help="comma floats for both alpha and beta")
        e.add_argument("--threads", type=int, default=1)
        e.add_argument("--out", required=True, help="report directory")
        if kind == "oneclass":
            e.add_argument("--queries", type=int, default=100)
            # one-class defaults to the fixed pair; pass --select-grid to
            # re-enable per-episode selection
            e.add_argument("--fixed-alpha-beta", default="0.1,1.0")
            e.add_argument("--select-grid", action="store_true")
            e.add_argument("--roc-csv", default=None)
            e.set_defaults(func=cmd_eval_oneclass)
        else:
            e.add_argument("--n-way", type=int, default=20)
            e.add_argument("--q-per-class", type=int, default=15)
            e.add_argument("--fixed-alpha-beta", default=None)
            e.set_defaults(func=cmd_eval_multiclass)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except SemstatsError as exc:  # pragma: no cover - safety net
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
