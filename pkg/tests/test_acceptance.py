"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Everything runs on the default synthetic world; run with ``pytest -s`` to see
the lines stream. Budgets are wall-clock seconds for the work attributed to
each criterion (shared fixtures are attributed to the first consumer).
"""

import time

import numpy as np
import pytest

from semstats.adapt import AdaptConfig
from semstats.classify import ClassModel, classify
from semstats.cli import main
from semstats.core import ClassStats, empirical_class_stats, zscore_apply, zscore_fit
from semstats.mapper import (
    MapperBundle,
    MapperParams,
    TrainConfig,
    baseline_predictor,
    mapper_gradient,
    mapper_loss,
    train_mapper,
)
from semstats.metrics import auroc, mse
from semstats.synth import SynthConfig, generate_world
from semstats.tasks import (
    BASELINE,
    COV_FROM_TEXT,
    MEAN_AND_COV,
    MEAN_FROM_TEXT,
    ProtocolConfig,
    run_protocol,
)

from test_metrics import auroc_pair_oracle


def report(criterion: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    status = "PASS" if ok and elapsed < budget else "FAIL"
    print(f"[{status}] {criterion}: {detail} ({elapsed:.1f}s / budget {budget:.0f}s)")
    assert ok, f"{criterion}: {detail}"
    assert elapsed < budget, f"{criterion}: took {elapsed:.1f}s, budget {budget}s"


@pytest.fixture(scope="module")
def world():
    ds, truth = generate_world(SynthConfig())
    return ds, truth


@pytest.fixture(scope="module")
def class_targets(world):
    ds, _ = world

    def targets(split):
        classes = ds.split_classes(split)
        stats = [empirical_class_stats(c.features) for c in classes]
        return (
            np.stack([c.text for c in classes]),
            np.stack([s.mean for s in stats]),
            np.stack([s.var_diag for s in stats]),
        )

    return {split: targets(split) for split in ("base", "val")}


@pytest.fixture(scope="module")
def trained(class_targets):
    """Both mappers trained with library-default config; timed for A2."""
    start = time.perf_counter()
    base_texts, base_means, base_vars = class_targets["base"]
    val_texts, val_means, val_vars = class_targets["val"]
    mu_std, sigma_std = zscore_fit(base_means), zscore_fit(base_vars)
    mu_params, mu_report = train_mapper(
        list(zip(base_texts, zscore_apply(mu_std, base_means))),
        list(zip(val_texts, zscore_apply(mu_std, val_means))),
        TrainConfig(seed=0),
    )
    sigma_params, sigma_report = train_mapper(
        list(zip(base_texts, zscore_apply(sigma_std, base_vars))),
        list(zip(val_texts, zscore_apply(sigma_std, val_vars))),
        TrainConfig(seed=1),
    )
    bundle = MapperBundle(mu_params, sigma_params, mu_std, sigma_std)
    return bundle, mu_report, sigma_report, time.perf_counter() - start


@pytest.fixture(scope="module")
def oneclass_run(world, trained):
    """Shared protocol run for A7-A9: fixed (0.1, 1.0), paired episodes."""
    ds, _ = world
    bundle, *_ = trained
    start = time.perf_counter()
    config = ProtocolConfig(
        kind="oneclass",
        shots=(0, 1, 4, 16),
        n_queries=100,
        selection="fixed",
        fixed=AdaptConfig(alpha=0.1, beta=1.0),
    )
    rep = run_protocol(
        ds,
        config,
        [BASELINE, MEAN_FROM_TEXT, COV_FROM_TEXT, MEAN_AND_COV],
        n_episodes=300,
        seed=42,
        mappers=bundle,
    )
    return rep, time.perf_counter() - start


def test_a1_standardization_identity(class_targets):
    start = time.perf_counter()
    _texts, base_means, base_vars = class_targets["base"]
    worst = 0.0
    for targets in (base_means, base_vars):
        z = zscore_apply(zscore_fit(targets), targets)
        constant = baseline_predictor(z)
        value = mse(np.tile(constant, (len(z), 1)), z)
        worst = max(worst, abs(value - 1.0))
    report(
        "A1 standardization identity",
        worst < 1e-9,
        f"baseline MSE deviates from 1.0 by {worst:.2e} (tol 1e-9)",
        time.perf_counter() - start,
        budget=1.0,
    )


def test_a2_learnability(trained):
    _bundle, mu_report, sigma_report, elapsed = trained
    ok = mu_report.final_val_mse <= 0.7 and sigma_report.final_val_mse <= 0.8
    report(
        "A2 learnability",
        ok,
        f"val MSE mean {mu_report.final_val_mse:.3f} (<=0.7), "
        f"cov {sigma_report.final_val_mse:.3f} (<=0.8)",
        elapsed,
        budget=120.0,
    )


def test_a3_gradient_correctness():
    start = time.perf_counter()
    rng = np.random.default_rng(31)
    rtol, atol, h = 1e-4, 1e-7, 1e-5
    worst = 0.0
    for _ in range(20):
        params = MapperParams(
            W1=rng.normal(size=(5, 3)),
            b1=rng.normal(size=5),
            W2=rng.normal(size=(2, 5)),
            b2=rng.normal(size=2),
        )
        batch = [(rng.normal(size=3), rng.normal(size=2)) for _ in range(4)]
        wd = float(rng.uniform(0.0, 0.2))
        analytic = mapper_gradient(params, batch, wd)
        for name in ("W1", "b1", "W2", "b2"):
            base = getattr(params, name)
            a = getattr(analytic, name)
            it = np.nditer(base, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                arrays = {n: getattr(params, n).copy() for n in ("W1", "b1", "W2", "b2")}
                arrays[name][idx] += h
                lp = mapper_loss(MapperParams(**arrays), batch, wd)
                arrays[name][idx] -= 2 * h
                lm = mapper_loss(MapperParams(**arrays), batch, wd)
                numeric = (lp - lm) / (2 * h)
                rel = abs(a[idx] - numeric) / max(abs(numeric), atol / rtol)
                worst = max(worst, rel)
                it.iternext()
    report(
        "A3 gradient correctness",
        worst <= rtol,
        f"worst relative error {worst:.2e} over 20 draws (tol 1e-4)",
        time.perf_counter() - start,
        budget=10.0,
    )


def test_a4_auroc_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(3, 50))
        scores = np.round(rng.normal(size=n) * 2.0) / 2.0  # quantized: many ties
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        worst = max(worst, abs(auroc(scores, labels) - auroc_pair_oracle(scores, labels)))
    report(
        "A4 AUROC oracle",
        worst < 1e-12,
        f"max |fast - pair-count| = {worst:.2e} over 500 instances (tol 1e-12)",
        time.perf_counter() - start,
        budget=10.0,
    )


def test_a5_baseline_reduction(world, trained):
    ds, _ = world
    bundle, *_ = trained
    start = time.perf_counter()
    config = ProtocolConfig(
        kind="oneclass",
        shots=(1, 4),
        n_queries=50,
        selection="fixed",
        fixed=AdaptConfig(alpha=0.0, beta=0.0),
    )
    rep = run_protocol(
        ds, config, [BASELINE, MEAN_AND_COV], n_episodes=100, seed=123, mappers=bundle
    )
    identical = all(
        np.array_equal(rep.per_episode[("Baseline", k)], rep.per_episode[("M&C", k)])
        for k in (1, 4)
    )
    report(
        "A5 baseline reduction",
        identical,
        "M&C with alpha=0, beta=0 bit-identical to Baseline over 100 paired episodes x 2 shot counts",
        time.perf_counter() - start,
        budget=30.0,
    )


def test_a6_ncm_reduction():
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    d, n_classes = 16, 8
    means = rng.normal(size=(n_classes, d))
    models = [
        ClassModel(ClassStats(mean=m, var_diag=np.ones(d)), label=f"c{i}")
        for i, m in enumerate(means)
    ]
    mismatches = 0
    for _ in range(1000):
        x = rng.normal(size=d) * 1.5
        ncm = f"c{int(np.argmin(np.linalg.norm(means - x, axis=1)))}"
        if classify(x, models) != ncm:
            mismatches += 1
    report(
        "A6 NCM reduction",
        mismatches == 0,
        f"{mismatches} disagreements with Euclidean NCM over 1000 queries",
        time.perf_counter() - start,
        budget=5.0,
    )


def test_a7_text_helps_oneclass(oneclass_run):
    rep, elapsed = oneclass_run
    details = []
    ok = True
    for k in (1, 4, 16):
        row = rep.delta("C", k)
        good = row.metric > 0.0 and row.metric - row.ci > 0.0
        ok = ok and good
        details.append(f"k={k}: +{row.metric:.4f}+-{row.ci:.4f}")
    report(
        "A7 text helps (one-class)",
        ok,
        "paired dAUROC (C - Baseline) with CI excluding 0: " + ", ".join(details),
        elapsed,
        budget=300.0,
    )


def test_a8_low_shot_mean_advantage(oneclass_run):
    rep, _ = oneclass_run
    d1 = rep.delta("M", 1).metric
    d16 = rep.delta("M", 16).metric
    report(
        "A8 low-shot mean advantage",
        d1 > d16,
        f"d(M - Baseline) at k=1 is {d1:+.4f} vs {d16:+.4f} at k=16",
        0.0,
        budget=300.0,
    )


def test_a9_zero_shot_viability(oneclass_run):
    rep, _ = oneclass_run
    baseline_1shot = rep.row("Baseline", 1).metric
    zs_m = rep.row("M", 0).metric
    zs_mc = rep.row("M&C", 0).metric
    ok = zs_m >= baseline_1shot and zs_mc >= baseline_1shot
    report(
        "A9 zero-shot viability",
        ok,
        f"zero-shot AUROC M {zs_m:.4f} / M&C {zs_mc:.4f} vs Baseline 1-shot {baseline_1shot:.4f}",
        0.0,
        budget=300.0,
    )


def test_a10_cli_determinism(tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "world.cfg"
    cfg.write_text(
        "n_classes = 24\nn_base = 12\nn_val = 6\nn_test = 6\n"
        "feat_dim = 8\ntext_dim = 4\nsamples_per_class = 40\nseed = 3\n"
    )

    root = tmp_path / "out"
    root.mkdir()

    def output_bytes() -> dict[str, bytes]:
        # identical flags on every invocation: same inputs, same output paths
        world = root / "world.fsts"
        mappers = root / "mappers"
        assert main(["synth-gen", "--config", str(cfg), "--out", str(world)]) == 0
        assert (
            main(
                ["train-mappers", "--data", str(world), "--out", str(mappers),
                 "--hidden", "16", "--epochs", "40", "--seed", "7"]
            )
            == 0
        )
        assert (
            main(
                ["eval-mse", "--data", str(world), "--mappers", str(mappers),
                 "--split", "val", "--out", str(root / "mse")]
            )
            == 0
        )
        assert (
            main(
                ["eval-oneclass", "--data", str(world), "--mappers", str(mappers),
                 "--variants", "baseline,m,c,mc", "--shots", "0,1,4",
                 "--episodes", "8", "--queries", "25", "--seed", "5",
                 "--out", str(root / "oneclass"), "--roc-csv", str(root / "roc.csv")]
            )
            == 0
        )
        assert (
            main(
                ["eval-multiclass", "--data", str(world), "--mappers", str(mappers),
                 "--variants", "baseline,mc", "--shots", "1,2", "--episodes", "6",
                 "--n-way", "4", "--q-per-class", "5", "--seed", "11",
                 "--grid", "0,0.5,1", "--out", str(root / "multiclass")]
            )
            == 0
        )
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    first = output_bytes()
    second = output_bytes()
    same_names = set(first) == set(second)
    diffs = [name for name in first if same_names and first[name] != second[name]]
    report(
        "A10 determinism",
        same_names and not diffs,
        f"all 5 subcommands re-run byte-identical across {len(first)} output files"
        + (f"; differing: {diffs}" if diffs else ""),
        time.perf_counter() - start,
        budget=120.0,
    )
