"""One few-shot episode, end to end.

Walks a single 1-shot task through the whole pipeline: predict statistics
from text, blend them with the lone support shot (alpha), shrink the
covariance toward the identity (beta), then score queries with the
Mahalanobis machinery, one-class and multi-class.
"""

import numpy as np

from semstats import (
    AdaptConfig,
    ClassModel,
    ClassStats,
    SynthConfig,
    auroc,
    classify,
    generate_world,
    interpolate_mean,
    multiclass_posterior,
    oneclass_score,
    shrink_cov,
)
from semstats.tasks import sample_multiclass_episode, sample_oneclass_episode

from _shared import train_default_bundle

ds, truth = generate_world(SynthConfig())
bundle = train_default_bundle(ds)

# --- one-class: is this query a member of the target class? ------------------
episode = sample_oneclass_episode(ds, k=1, n_queries=200, rng_seed=7)
label = episode.class_labels[0]
shot = episode.support_features[0][0]
predicted = bundle.predict(episode.class_text[0])

print(f"target class {label}, 1 support shot, 200 queries (half in-class)")
print(f"|shot - true mean|        = {np.linalg.norm(shot - truth[label].mean):.2f}")
print(f"|text pred - true mean|   = {np.linalg.norm(predicted.mean - truth[label].mean):.2f}")

for name, mean, var in (
    ("Baseline (shot + identity)", shot, np.ones(ds.feat_dim)),
    ("M   (alpha=0.1 blend)", interpolate_mean(shot, predicted.mean, 0.1), np.ones(ds.feat_dim)),
    ("C   (text covariance)", shot, shrink_cov(predicted.var_diag, 1.0)),
    (
        "M&C (both)",
        interpolate_mean(shot, predicted.mean, 0.1),
        shrink_cov(predicted.var_diag, 1.0),
    ),
):
    stats = ClassStats(mean=mean, var_diag=var)
    scores = [oneclass_score(x, stats) for x in episode.query_features]
    print(f"  {name:<28} AUROC {auroc(scores, episode.query_labels):.3f}")

# --- multi-class: 5-way decision ---------------------------------------------
episode = sample_multiclass_episode(ds, n_way=5, k_shot=1, q_per_class=10, rng_seed=3)
adapt = AdaptConfig(alpha=0.5, beta=1.0)

models = []
for i, lbl in enumerate(episode.class_labels):
    pred = bundle.predict(episode.class_text[i])
    mean = interpolate_mean(episode.support_features[i][0], pred.mean, adapt.alpha)
    models.append(ClassModel(ClassStats(mean, shrink_cov(pred.var_diag, adapt.beta)), lbl))

correct = 0
for x, y in zip(episode.query_features, episode.query_labels):
    if classify(x, models) == episode.class_labels[y]:
        correct += 1
print(f"\n5-way 1-shot with text statistics: {correct}/{len(episode.query_labels)} correct")

x = episode.query_features[0]
posterior = multiclass_posterior(x, models)
print("posterior of the first query:",
      {m.label: f"{p:.3f}" for m, p in zip(models, posterior)})
print(f"true class: {episode.class_labels[episode.query_labels[0]]}")
