"""Shared helper for the demo scripts: train the default mapper pair once."""

import numpy as np

from semstats import (
    MapperBundle,
    TrainConfig,
    empirical_class_stats,
    train_mapper,
    zscore_apply,
    zscore_fit,
)


def train_default_bundle(ds, seed: int = 0) -> MapperBundle:
    def targets(split):
        classes = ds.split_classes(split)
        stats = [empirical_class_stats(c.features) for c in classes]
        return (
            np.stack([c.text for c in classes]),
            np.stack([s.mean for s in stats]),
            np.stack([s.var_diag for s in stats]),
        )

    base_texts, base_means, base_vars = targets("base")
    val_texts, val_means, val_vars = targets("val")
    mu_std, sigma_std = zscore_fit(base_means), zscore_fit(base_vars)
    print("training mappers (a few seconds)...")
    mu_params, _ = train_mapper(
        list(zip(base_texts, zscore_apply(mu_std, base_means))),
        list(zip(val_texts, zscore_apply(mu_std, val_means))),
        TrainConfig(seed=seed),
    )
    sigma_params, _ = train_mapper(
        list(zip(base_texts, zscore_apply(sigma_std, base_vars))),
        list(zip(val_texts, zscore_apply(sigma_std, val_vars))),
        TrainConfig(seed=seed + 1),
    )
    return MapperBundle(mu_params, sigma_params, mu_std, sigma_std)
