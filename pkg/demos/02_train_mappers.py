"""Training the text-to-statistics mapping networks.

Two small MLPs learn to predict each class's mean (and diagonal variance)
from its text embedding. Targets are z-scored on the base classes, which
pins the constant predictor's MSE at exactly 1 there, so any value below
1 on held-out classes means the text really carries the information.
"""

import numpy as np

from semstats import (
    SynthConfig,
    TrainConfig,
    baseline_predictor,
    empirical_class_stats,
    generate_world,
    mse,
    train_mapper,
    zscore_apply,
    zscore_fit,
)
from semstats.mapper import forward_batch

ds, _ = generate_world(SynthConfig())


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

for head, base_t, val_t in (("mean", base_means, val_means), ("covariance", base_vars, val_vars)):
    std = zscore_fit(base_t)
    z_base, z_val = zscore_apply(std, base_t), zscore_apply(std, val_t)

    constant = baseline_predictor(z_base)
    baseline_train = mse(np.tile(constant, (len(z_base), 1)), z_base)
    baseline_val = mse(np.tile(constant, (len(z_val), 1)), z_val)

    params, report = train_mapper(
        list(zip(base_texts, z_base)),
        list(zip(val_texts, z_val)),
        TrainConfig(seed=0),
    )
    trained_val = mse(forward_batch(params, val_texts), z_val)

    print(f"\n=== {head} head ===")
    print(f"baseline MSE: train {baseline_train:.6f} (exactly 1 by construction), "
          f"val {baseline_val:.3f}")
    print(f"trained MSE:  val {trained_val:.3f}  "
          f"(best epoch {report.best_epoch} of {len(report.val_loss_curve)} run)")
    curve = report.val_loss_curve
    marks = {0, len(curve) // 4, len(curve) // 2, 3 * len(curve) // 4, len(curve) - 1}
    print("validation loss trajectory:")
    for epoch in sorted(marks):
        print(f"  epoch {epoch:>4}: {curve[epoch]:.4f}")
