import json

import numpy as np
import pytest

from clad.cli import (
    DEFAULT_CLUSTER_COUNTS, DEFAULT_HIDDEN_DIMS, default_grid, main, read_ablation_csv,
    resolve_config,
)
from clad.detector import read_scores_csv
from clad.evaluation import EvaluationReport, ScoredTestSet, auroc
from clad.selflabel import PseudoLabels

FAST = {"autoencoder": {"epochs": 20}, "clustering": {"epochs": 10, "n_init": 3},
        "classifier": {"epochs": 20}}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = write_json(base / "fast.json", FAST)
    assert main(["run", "--config", cfg, "--out", str(base / "a")]) == 0
    return base, cfg


def test_run_writes_every_artifact(synthetic_run):
    base, _ = synthetic_run
    for name in ("autoencoder.npz", "clusters.npz", "pseudo_labels.csv", "classifier.npz",
                 "scores.csv", "baseline_scores.csv", "report.json", "config.json"):
        assert (base / "a" / name).exists(), name
    report = EvaluationReport.from_json(base / "a" / "report.json")
    assert 0.0 <= report.auroc <= 1.0


def test_same_seed_byte_identical_scores(synthetic_run):
    base, cfg = synthetic_run
    assert main(["run", "--config", cfg, "--out", str(base / "b")]) == 0
    assert (base / "a" / "scores.csv").read_bytes() == (base / "b" / "scores.csv").read_bytes()


def test_stages_compose_to_run(synthetic_run):
    base, cfg = synthetic_run
    out = str(base / "staged")
    for stage in ("extract", "cluster", "classify", "score", "evaluate"):
        assert main(["stage", stage, "--config", cfg, "--out", out]) == 0
    for name in ("pseudo_labels.csv", "scores.csv", "baseline_scores.csv"):
        assert (base / "a" / name).read_bytes() == (base / "staged" / name).read_bytes()
    a = EvaluationReport.from_json(base / "a" / "report.json")
    b = EvaluationReport.from_json(base / "staged" / "report.json")
    a.config.pop("out_dir"), b.config.pop("out_dir")
    assert (a.auroc, a.config, a.composition, a.extra) == (b.auroc, b.config, b.composition, b.extra)


def test_report_echoes_complete_config(synthetic_run):
    base, _ = synthetic_run
    report = EvaluationReport.from_json(base / "a" / "report.json")
    cfg = report.config
    assert cfg["autoencoder"]["epochs"] == 20
    assert cfg["classifier"]["learning_rate"] == 0.001
    assert cfg["detector"]["temperature"] == 1000.0
    assert set(cfg["derived_seeds"]) == {"extract", "cluster", "classify"}
    assert report.extra["n_labels"] == 3


def test_missing_upstream_artifact_named(tmp_path, capsys):
    assert main(["stage", "classify", "--out", str(tmp_path)]) != 0
    err = capsys.readouterr().err
    assert "[classify]" in err and "clusters.npz" in err


def test_bad_config_key_is_tagged(tmp_path, capsys):
    cfg = write_json(tmp_path / "bad.json", {"autoencoder": {"nope": 1}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) != 0
    assert "[config]" in capsys.readouterr().err


def test_evaluate_hand_written_scores(tmp_path):
    (tmp_path / "scores.csv").write_text(
        "sample_index,s,y_hat,true_binary_label\n"
        "0,0.9,0,0\n1,0.8,1,0\n2,0.8,1,1\n3,0.1,2,1\n")
    assert main(["stage", "evaluate", "--scenario", "mnist:CUR", "--out", str(tmp_path)]) == 0
    report = EvaluationReport.from_json(tmp_path / "report.json")
    scores, labels = read_scores_csv(tmp_path / "scores.csv")
    assert report.auroc == auroc(ScoredTestSet.from_scores(scores, labels)) == 0.875
    assert report.extra["scenario"]["normal_labels"] == [0, 3, 8]
    assert report.composition["n_test_abnormal"] == 2


def test_precedence_preset_file_flags(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"clustering": {"n_clusters": 5},
                                           "detector": {"temperature": 10.0}})
    assert resolve_config("synthetic").clustering.n_clusters == 3
    assert resolve_config("synthetic", cfg).clustering.n_clusters == 5
    final = resolve_config("synthetic", cfg, clusters=7, seed=4, epsilon=0.0)
    assert final.clustering.n_clusters == 7
    assert final.detector.temperature == 10.0 and final.detector.epsilon == 0.0
    assert final.seed == 4
    # a preset key in the file is used when --scenario is absent
    preset = write_json(tmp_path / "p.json", {"preset": "mnist:STR"})
    assert resolve_config(config_path=preset).scenario.name == "STR"


def test_report_command(synthetic_run, capsys):
    base, _ = synthetic_run
    assert main(["report", str(base / "a")]) == 0
    assert "AUROC" in capsys.readouterr().out


def test_default_grid_ranges():
    grid = default_grid()
    assert DEFAULT_CLUSTER_COUNTS == (2, 4, 6, 8, 10, 12, 14, 16, 18, 20)
    assert DEFAULT_HIDDEN_DIMS[0] == 10 and DEFAULT_HIDDEN_DIMS[-1] == 100
    assert {k for k, _ in grid} >= set(DEFAULT_CLUSTER_COUNTS)
    assert {d for _, d in grid} == set(DEFAULT_HIDDEN_DIMS)
    assert len(grid) == len(set(grid))


def test_ablation_three_settings_and_resume(tmp_path, capsys):
    cfg = write_json(tmp_path / "fast.json", FAST)
    grid = write_json(tmp_path / "grid.json", {"settings": [[2, 2], [3, 2], [4, 2]]})
    out = tmp_path / "abl"
    out.mkdir()
    # pretend an earlier, interrupted sweep finished the first setting
    (out / "ablation.csv").write_text("n_clusters,hidden_dim,auroc,runtime_seconds\n2,2,0.123,1.0\n")
    assert main(["ablate", "--config", cfg, "--grid", grid, "--out", str(out)]) == 0
    rows = read_ablation_csv(out / "ablation.csv")
    assert sorted(rows) == [(2, 2), (3, 2), (4, 2)]
    assert rows[(2, 2)].auroc == 0.123
    printed = capsys.readouterr().out.strip().splitlines()
    assert len(printed) == 4


def test_mix_with_two_clusters(tmp_path, mnist_dir):
    cfg = write_json(tmp_path / "mix.json", {
        "scenario": {"data_dir": str(mnist_dir), "max_train": 200, "max_test": 300},
        "autoencoder": {"epochs": 3}, "clustering": {"epochs": 3, "n_init": 2},
        "classifier": {"epochs": 3}})
    out = tmp_path / "mix"
    assert main(["run", "--scenario", "mnist:MIX", "--config", cfg, "--clusters", "2",
                 "--out", str(out)]) == 0
    report = EvaluationReport.from_json(out / "report.json")
    assert report.extra["n_labels"] == 2
    assert report.extra["scenario"]["normal_labels"] == [2, 5, 6, 9]
    labels = PseudoLabels.from_csv(out / "pseudo_labels.csv", 2)
    assert set(np.unique(labels.labels)) <= {0, 1}
