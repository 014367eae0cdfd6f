import csv
from pathlib import Path

import numpy as np
import pytest

from lifeclust.cli import main
from lifeclust.data import read_dataset_csv, read_labels_csv


def run(args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def synth_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthdata")
    data_path = root / "toy.csv"
    code = run(["synth", "--clusters", "C1,C3", "--n", "250", "--tm", "150",
                "--seed", "7", "--out", data_path])
    assert code == 0
    return data_path, root / "toy_labels.csv"


def test_synth_outputs(synth_files):
    data_path, labels_path = synth_files
    data = read_dataset_csv(data_path, t_m=150)
    labels = read_labels_csv(labels_path)
    assert len(data) == 500
    assert sorted(set(labels.values())) == [0, 1]


def test_train_assign_eval_pipeline(synth_files, tmp_path):
    data_path, labels_path = synth_files
    run_dir = tmp_path / "run1"
    code = run(["train", "--data", data_path, "--tm", 150, "--k", 2,
                "--epochs", 25, "--batch-size", 128, "--hidden-units", 32,
                "--seed", 3, "--out", run_dir])
    assert code == 0
    checkpoint = run_dir / "checkpoint.txt"
    assert checkpoint.read_text().splitlines()[0] == "DEEPCLIFE1"
    assert (run_dir / "config_echo.txt").exists()
    assert (run_dir / "train_log.csv").exists()

    out_labels = tmp_path / "assigned.csv"
    code = run(["assign", "--checkpoint", checkpoint, "--data", data_path,
                "--tm", 150, "--out", out_labels])
    assert code == 0
    first = out_labels.read_bytes()
    code = run(["assign", "--checkpoint", checkpoint, "--data", data_path,
                "--tm", 150, "--out", out_labels])
    assert code == 0
    assert out_labels.read_bytes() == first  # idempotent

    eval_dir = tmp_path / "eval1"
    code = run(["eval", "--data", data_path, "--tm", 150, "--labels", out_labels,
                "--true-labels", labels_path, "--out", eval_dir])
    assert code == 0
    report = dict(line.split("=", 1) for line in
                  (eval_dir / "report.txt").read_text().splitlines())
    assert {"c_index", "ibs", "logrank", "ari", "cluster_sizes"} <= set(report)
    assert (eval_dir / "curves.csv").exists()
    assert (eval_dir / "curves.png").exists()
    with (eval_dir / "curves.csv").open() as fh:
        header = next(csv.reader(fh))
    assert header == ["t", "s_0", "s_1"]


def test_kuiper_test_identical_files(tmp_path, capsys):
    sample = tmp_path / "sample.csv"
    with sample.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lifetime", "event"])
        for value in [3, 5, 5, 8, 12, 20]:
            writer.writerow([value, 1])
    code = run(["kuiper-test", "--a", sample, "--b", sample])
    assert code == 0
    out = dict(line.split("=", 1) for line in
               capsys.readouterr().out.strip().splitlines())
    assert float(out["p_upper"]) == 1.0
    assert float(out["v_stat"]) == 0.0
    assert float(out["p_lower"]) == 1.0


def test_kuiper_test_detects_separation(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("\n".join(str(v) for v in range(1, 60)) + "\n")
    b.write_text("\n".join(str(v + 40) for v in range(1, 60)) + "\n")
    assert run(["kuiper-test", "--a", a, "--b", b]) == 0
    out = dict(line.split("=", 1) for line in
               capsys.readouterr().out.strip().splitlines())
    assert float(out["p_upper"]) < 1e-6
    assert float(out["p_lower"]) <= float(out["p_reference"]) <= float(out["p_upper"])


def test_cv_reports_and_figures(synth_files, tmp_path):
    data_path, labels_path = synth_files
    out_dir = tmp_path / "cv"
    code = run(["cv", "--data", data_path, "--tm", 150, "--k", 2, "--folds", 3,
                "--epochs", 25, "--batch-size", 128, "--hidden-units", 32,
                "--seed", 1, "--true-labels", labels_path, "--out", out_dir])
    assert code == 0
    summary = dict(line.split("=", 1) for line in
                   (out_dir / "report.txt").read_text().splitlines())
    assert {"ari_mean", "ari_se", "c_index_mean", "folds"} <= set(summary)
    for fold in range(3):
        assert (out_dir / f"report_fold{fold}.txt").exists()
        assert (out_dir / f"curves_fold{fold}.csv").exists()
        assert (out_dir / f"curves_fold{fold}.png").exists()


def test_config_echo_round_trip(synth_files, tmp_path):
    data_path, labels_path = synth_files
    first = tmp_path / "first"
    code = run(["cv", "--data", data_path, "--tm", 150, "--k", 2, "--folds", 2,
                "--epochs", 20, "--batch-size", 128, "--hidden-units", 32,
                "--seed", 6, "--true-labels", labels_path, "--out", first])
    assert code == 0
    second = tmp_path / "second"
    code = run(["cv", "--config", first / "config_echo.txt", "--data", data_path,
                "--tm", 150, "--out", second])
    assert code == 0
    for name in ["report.txt", "report_fold0.txt", "report_fold1.txt",
                 "curves_fold0.csv", "config_echo.txt"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_usage_error_exit_code():
    assert run(["train", "--tm", 10]) == 1          # missing --data
    assert run(["unknown-command"]) == 1


def test_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,nope\n1,2\n")
    assert run(["train", "--data", bad, "--tm", 10, "--k", 2]) == 2


def test_failed_command_leaves_no_partial_outputs(synth_files, tmp_path):
    data_path, _ = synth_files
    stray_labels = tmp_path / "stray.csv"
    stray_labels.write_text("id,label\nnot-a-subject,0\n")
    out_dir = tmp_path / "evalfail"
    code = run(["eval", "--data", data_path, "--tm", 150,
                "--labels", stray_labels, "--out", out_dir])
    assert code == 2
    assert not out_dir.exists() or not any(out_dir.iterdir())
