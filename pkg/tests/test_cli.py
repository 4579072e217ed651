import csv
import json
from pathlib import Path

import numpy as np
import pytest

from semstats.cli import main

TINY_CFG = """\
# desk-size world for CLI tests
n_classes = 24
n_base = 12
n_val = 6
n_test = 6
feat_dim = 8
text_dim = 4
samples_per_class = 40
seed = 3
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "world.cfg"
    cfg.write_text(TINY_CFG)
    world = root / "world.fsts"
    assert main(["synth-gen", "--config", str(cfg), "--out", str(world)]) == 0
    mappers = root / "mappers"
    assert (
        main(
            [
                "train-mappers",
                "--data",
                str(world),
                "--out",
                str(mappers),
                "--hidden",
                "32",
                "--epochs",
                "200",
                "--seed",
                "0",
            ]
        )
        == 0
    )
    return {"root": root, "cfg": cfg, "world": world, "mappers": mappers}


def read_bytes_map(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(Path(directory).glob("*")) if p.is_file()}


class TestSynthGen:
    def test_rerun_is_bit_identical(self, workdir, tmp_path):
        out1 = tmp_path / "a.fsts"
        out2 = tmp_path / "b.fsts"
        for out in (out1, out2):
            assert main(["synth-gen", "--config", str(workdir["cfg"]), "--out", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert out1.with_suffix(".json").read_text() == out2.with_suffix(".json").read_text()

    def test_invalid_split_sum_names_constraint(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("n_classes = 10\nn_base = 5\nn_val = 3\nn_test = 3\n")
        code = main(["synth-gen", "--config", str(cfg), "--out", str(tmp_path / "w.fsts")])
        assert code == 2
        assert "sum to n_classes" in capsys.readouterr().err

    def test_parse_error_reports_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("n_classes = 24\nthis line is wrong\n")
        code = main(["synth-gen", "--config", str(cfg), "--out", str(tmp_path / "w.fsts")])
        assert code == 2
        assert "bad.cfg:2" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("wibble = 3\n")
        assert main(["synth-gen", "--config", str(cfg), "--out", str(tmp_path / "w.fsts")]) == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_domain_shift_override(self, workdir, tmp_path):
        out = tmp_path / "cd.fsts"
        assert (
            main(
                [
                    "synth-gen",
                    "--config",
                    str(workdir["cfg"]),
                    "--out",
                    str(out),
                    "--domain-shift",
                    "2.0",
                ]
            )
            == 0
        )
        manifest = json.loads(out.with_suffix(".json").read_text())
        assert manifest["provenance"]["domain_shift"] == 2.0


class TestTrainMappers:
    def test_outputs_exist(self, workdir):
        d = workdir["mappers"]
        assert (d / "mu.fsmp").exists()
        assert (d / "sigma.fsmp").exists()
        assert (d / "mappers.json").exists()
        report = json.loads((d / "train_report.json").read_text())
        assert report["mu"]["final_val_mse"] < 1.0

    def test_zero_epochs_is_config_error(self, workdir, tmp_path, capsys):
        code = main(
            [
                "train-mappers",
                "--data",
                str(workdir["world"]),
                "--out",
                str(tmp_path / "m"),
                "--epochs",
                "0",
            ]
        )
        assert code == 2
        assert "epochs" in capsys.readouterr().err

    def test_same_seed_gives_identical_bytes(self, workdir, tmp_path):
        outs = []
        for name in ("m1", "m2"):
            out = tmp_path / name
            assert (
                main(
                    [
                        "train-mappers",
                        "--data",
                        str(workdir["world"]),
                        "--out",
                        str(out),
                        "--hidden",
                        "16",
                        "--epochs",
                        "40",
                        "--seed",
                        "7",
                    ]
                )
                == 0
            )
            outs.append(read_bytes_map(out))
        assert outs[0] == outs[1]

    def test_divergence_exits_4_with_diagnostic(self, workdir, tmp_path, capsys):
        out = tmp_path / "diverged"
        code = main(
            [
                "train-mappers",
                "--data",
                str(workdir["world"]),
                "--out",
                str(out),
                "--lr",
                "1e9",
                "--epochs",
                "50",
            ]
        )
        assert code == 4
        assert "diverged" in capsys.readouterr().err
        assert "diverged" in (out / "failure.json").read_text()

    def test_missing_data_is_data_error(self, tmp_path, capsys):
        code = main(
            ["train-mappers", "--data", str(tmp_path / "nope.fsts"), "--out", str(tmp_path / "m")]
        )
        assert code == 3


class TestEvalMse:
    def test_baseline_on_base_split_is_one(self, workdir, tmp_path, capsys):
        out = tmp_path / "mse"
        code = main(
            [
                "eval-mse",
                "--data",
                str(workdir["world"]),
                "--mappers",
                str(workdir["mappers"]),
                "--split",
                "base",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rows = json.loads((out / "mse.json").read_text())["rows"]
        for row in rows:
            if row["model"] == "baseline":
                assert abs(row["mse"] - 1.0) < 1e-9

    def test_trained_beats_baseline_on_val(self, workdir, tmp_path):
        out = tmp_path / "mse"
        assert (
            main(
                [
                    "eval-mse",
                    "--data",
                    str(workdir["world"]),
                    "--mappers",
                    str(workdir["mappers"]),
                    "--split",
                    "val",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        rows = {(r["head"], r["model"]): r["mse"] for r in json.loads((out / "mse.json").read_text())["rows"]}
        assert rows[("mean", "trained")] < rows[("mean", "baseline")]
        assert rows[("cov", "trained")] < rows[("cov", "baseline")]

    def test_cross_domain_baseline_above_one(self, workdir, tmp_path):
        cd = tmp_path / "cd.fsts"
        assert (
            main(
                [
                    "synth-gen",
                    "--config",
                    str(workdir["cfg"]),
                    "--out",
                    str(cd),
                    "--domain-shift",
                    "2.0",
                ]
            )
            == 0
        )
        out = tmp_path / "mse"
        assert (
            main(
                [
                    "eval-mse",
                    "--data",
                    str(workdir["world"]),
                    "--mappers",
                    str(workdir["mappers"]),
                    "--split",
                    "test",
                    "--cross-domain-data",
                    str(cd),
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        rows = {(r["head"], r["model"]): r["mse"] for r in json.loads((out / "mse.json").read_text())["rows"]}
        assert rows[("mean", "baseline")] > 1.0

    def test_missing_mappers_is_data_error(self, workdir, tmp_path):
        code = main(
            [
                "eval-mse",
                "--data",
                str(workdir["world"]),
                "--mappers",
                str(tmp_path / "absent"),
                "--split",
                "val",
            ]
        )
        assert code == 3


class TestEvalProtocols:
    def run_oneclass(self, workdir, out, extra=()):
        return main(
            [
                "eval-oneclass",
                "--data",
                str(workdir["world"]),
                "--mappers",
                str(workdir["mappers"]),
                "--variants",
                "baseline,m,c,mc",
                "--shots",
                "0,1,4",
                "--episodes",
                "10",
                "--queries",
                "30",
                "--seed",
                "5",
                "--out",
                str(out),
                *extra,
            ]
        )

    def test_oneclass_report_and_zero_shot_rules(self, workdir, tmp_path):
        out = tmp_path / "oc"
        assert self.run_oneclass(workdir, out) == 0
        with open(out / "report.csv") as fh:
            rows = {(r["variant"], int(r["k"])): r for r in csv.DictReader(fh)}
        assert rows[("Baseline", 0)]["error"] == "zero-shot requires text mean"
        assert rows[("C", 0)]["error"] == "zero-shot requires text mean"
        assert rows[("M", 0)]["metric"] != ""
        assert rows[("M&C", 0)]["metric"] != ""
        for variant in ("Baseline", "M", "C", "M&C"):
            assert rows[(variant, 1)]["error"] == ""
            assert 0.0 <= float(rows[(variant, 1)]["metric"]) <= 1.0

    def test_oneclass_rerun_byte_identical(self, workdir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self.run_oneclass(workdir, a) == 0
        assert self.run_oneclass(workdir, b) == 0
        assert read_bytes_map(a) == read_bytes_map(b)

    def test_baseline_equals_mc_with_zero_pair(self, workdir, tmp_path):
        out = tmp_path / "zero"
        assert (
            main(
                [
                    "eval-oneclass",
                    "--data",
                    str(workdir["world"]),
                    "--mappers",
                    str(workdir["mappers"]),
                    "--variants",
                    "baseline,mc",
                    "--shots",
                    "1,4",
                    "--episodes",
                    "12",
                    "--queries",
                    "25",
                    "--seed",
                    "3",
                    "--fixed-alpha-beta",
                    "0,0",
                    "--out",
                    str(out),
                ]
            )
            == 0
        )
        doc = json.loads((out / "report.json").read_text())
        per = doc["per_episode"]
        assert per["Baseline@1"] == per["M&C@1"]
        assert per["Baseline@4"] == per["M&C@4"]

    def test_roc_csv(self, workdir, tmp_path):
        out = tmp_path / "roc"
        roc = tmp_path / "roc.csv"
        assert self.run_oneclass(workdir, out, extra=["--roc-csv", str(roc)]) == 0
        with open(roc) as fh:
            rows = list(csv.DictReader(fh))
        assert {r["variant"] for r in rows} >= {"Baseline", "C"}
        fprs = [float(r["fpr"]) for r in rows]
        tprs = [float(r["tpr"]) for r in rows]
        assert min(fprs) == 0.0 and max(fprs) == 1.0
        assert min(tprs) >= 0.0 and max(tprs) <= 1.0

    def test_multiclass_smoke_and_determinism(self, workdir, tmp_path):
        def run(out):
            return main(
                [
                    "eval-multiclass",
                    "--data",
                    str(workdir["world"]),
                    "--mappers",
                    str(workdir["mappers"]),
                    "--variants",
                    "baseline,mc",
                    "--shots",
                    "1,2",
                    "--episodes",
                    "8",
                    "--n-way",
                    "4",
                    "--q-per-class",
                    "5",
                    "--seed",
                    "11",
                    "--grid",
                    "0,0.5,1",
                    "--out",
                    str(out),
                ]
            )

        a, b = tmp_path / "a", tmp_path / "b"
        assert run(a) == 0
        assert run(b) == 0
        assert read_bytes_map(a) == read_bytes_map(b)
        doc = json.loads((a / "report.json").read_text())
        assert doc["config"]["n_way"] == 4
        for row in doc["rows"]:
            assert row["error"] is None
            assert 0.0 <= row["metric"] <= 1.0

    def test_baseline_only_needs_no_mappers(self, workdir, tmp_path):
        out = tmp_path / "nb"
        code = main(
            [
                "eval-oneclass",
                "--data",
                str(workdir["world"]),
                "--variants",
                "baseline",
                "--shots",
                "1",
                "--episodes",
                "5",
                "--queries",
                "20",
                "--seed",
                "1",
                "--out",
                str(out),
            ]
        )
        assert code == 0

    def test_text_variants_without_mappers_is_data_error(self, workdir, tmp_path, capsys):
        code = main(
            [
                "eval-oneclass",
                "--data",
                str(workdir["world"]),
                "--variants",
                "baseline,c",
                "--shots",
                "1",
                "--episodes",
                "5",
                "--queries",
                "20",
                "--seed",
                "1",
                "--out",
                str(tmp_path / "x"),
            ]
        )
        assert code == 3
        assert "mappers" in capsys.readouterr().err

    def test_unknown_variant_is_config_error(self, workdir, tmp_path):
        code = main(
            [
                "eval-oneclass",
                "--data",
                str(workdir["world"]),
                "--variants",
                "baseline,zzz",
                "--shots",
                "1",
                "--episodes",
                "2",
                "--queries",
                "10",
                "--seed",
                "0",
                "--out",
                str(tmp_path / "x"),
            ]
        )
        assert code == 2
