import json

import numpy as np
import pytest

from sparselect.cli import main
from sparselect.errors import ContractError
from sparselect.pipeline import PipelineConfig, make_synthetic, run_pipeline
from sparselect.tensorio import (
    load_indices,
    load_labels,
    load_matrix_bin,
    load_matrix_csv,
    save_labels,
    save_matrix_bin,
)


def _write_dataset(tmp_path, seed=9, rows=60, cols=12, informative=4, **kwargs):
    X, labels, weights = make_synthetic(seed, rows, cols, informative, **kwargs)
    matrix = tmp_path / "X.spfm"
    ylab = tmp_path / "y.txt"
    save_matrix_bin(X, matrix)
    save_labels(labels, ylab)
    return matrix, ylab, X, labels, weights


def _report_without_timings(path):
    payload = json.loads(path.read_text())
    payload.pop("timings_seconds")
    return payload


# ------------------------------------------------------------- subcommands

def test_synth_writes_consistent_files(tmp_path):
    rc = main([
        "synth", "--seed", "5", "--rows", "30", "--cols", "8", "--informative", "3",
        "--out-matrix", str(tmp_path / "X.spfm"), "--out-labels", str(tmp_path / "y.txt"),
        "--out-support", str(tmp_path / "support.txt"),
    ])
    assert rc == 0
    X = load_matrix_bin(tmp_path / "X.spfm")
    labels = load_labels(tmp_path / "y.txt")
    assert X.shape == (30, 8) and labels.shape == (30,)
    assert load_indices(tmp_path / "support.txt").size == 3


def test_standardize_subcommand(tmp_path):
    matrix, _, X, _, _ = _write_dataset(tmp_path)
    rc = main([
        "standardize", "--matrix", str(matrix), "--out", str(tmp_path / "Z.spfm"),
        "--save-stats", str(tmp_path / "stats.json"),
    ])
    assert rc == 0
    Z = load_matrix_bin(tmp_path / "Z.spfm")
    assert np.abs(Z.mean(axis=0)).max() < 1e-10
    # replaying saved stats reproduces the transform
    rc = main([
        "standardize", "--matrix", str(matrix), "--out", str(tmp_path / "Z2.spfm"),
        "--stats", str(tmp_path / "stats.json"),
    ])
    assert rc == 0
    np.testing.assert_array_equal(load_matrix_bin(tmp_path / "Z2.spfm"), Z)


def test_oversample_subcommand(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path, positive_fraction=0.2)
    rc = main([
        "oversample", "--matrix", str(matrix), "--labels", str(ylab), "--seed", "1",
        "--out-matrix", str(tmp_path / "Xb.spfm"), "--out-labels", str(tmp_path / "yb.txt"),
    ])
    assert rc == 0
    counts = np.bincount(load_labels(tmp_path / "yb.txt"))
    assert counts[0] == counts[1]


def test_split_subcommand(tmp_path):
    matrix, ylab, X, labels, _ = _write_dataset(tmp_path)
    rc = main([
        "split", "--matrix", str(matrix), "--labels", str(ylab),
        "--train-fraction", "0.75", "--seed", "3", "--out-dir", str(tmp_path / "split"),
    ])
    assert rc == 0
    train = load_matrix_bin(tmp_path / "split" / "train_matrix.spfm")
    test = load_matrix_bin(tmp_path / "split" / "test_matrix.spfm")
    assert train.shape[0] + test.shape[0] == X.shape[0]


def test_lasso_subcommand_outputs_match(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    rc = main([
        "lasso", "--matrix", str(matrix), "--targets", str(ylab), "--lambda", "0.01",
        "--out-coef", str(tmp_path / "coef.spfm"), "--out-mask", str(tmp_path / "mask.txt"),
    ])
    assert rc == 0
    coef = load_matrix_bin(tmp_path / "coef.spfm").reshape(-1)
    mask = load_indices(tmp_path / "mask.txt")
    np.testing.assert_array_equal(mask, np.flatnonzero(np.abs(coef) > 1e-12))


def test_enet_subcommand(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    rc = main([
        "enet", "--matrix", str(matrix), "--targets", str(ylab),
        "--alpha", "0.01", "--l1-ratio", "0.5",
        "--out-coef", str(tmp_path / "coef.spfm"), "--out-mask", str(tmp_path / "mask.txt"),
    ])
    assert rc == 0
    assert load_matrix_bin(tmp_path / "coef.spfm").shape[0] == 1


def test_pgd_subcommand_writes_history(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    rc = main([
        "pgd", "--matrix", str(matrix), "--targets", str(ylab), "--lambda", "0.1",
        "--algo", "ista",
        "--out-coef", str(tmp_path / "coef.spfm"), "--out-mask", str(tmp_path / "mask.txt"),
        "--out-history", str(tmp_path / "history.csv"),
    ])
    assert rc == 0
    lines = (tmp_path / "history.csv").read_text().splitlines()
    assert lines[0] == "iteration,objective"
    objectives = [float(line.split(",")[1]) for line in lines[1:]]
    assert len(objectives) >= 1
    assert all(b <= a for a, b in zip(objectives, objectives[1:]))


def test_pca_and_kpca_subcommands(tmp_path):
    matrix, *_ = _write_dataset(tmp_path)
    rc = main([
        "pca", "--matrix", str(matrix), "--components", "3",
        "--out-model", str(tmp_path / "pca"), "--out-transformed", str(tmp_path / "Zp.spfm"),
    ])
    assert rc == 0
    assert load_matrix_bin(tmp_path / "Zp.spfm").shape == (60, 3)
    rc = main([
        "kpca", "--matrix", str(matrix), "--components", "3", "--gamma", "0.1",
        "--out-model", str(tmp_path / "kpca"), "--out-transformed", str(tmp_path / "Zk.spfm"),
    ])
    assert rc == 0
    assert load_matrix_bin(tmp_path / "Zk.spfm").shape == (60, 3)


def test_knn_subcommand(tmp_path):
    matrix, ylab, X, labels, _ = _write_dataset(tmp_path)
    rc = main([
        "knn", "--train-matrix", str(matrix), "--train-labels", str(ylab),
        "--query-matrix", str(matrix), "--k", "1", "--out", str(tmp_path / "pred.txt"),
    ])
    assert rc == 0
    np.testing.assert_array_equal(load_labels(tmp_path / "pred.txt"), labels)


def test_eval_subcommand_hand_example(tmp_path, capsys):
    save_labels([0, 0, 1, 1], tmp_path / "t.txt")
    save_labels([0, 1, 1, 1], tmp_path / "p.txt")
    rc = main([
        "eval", "--truth", str(tmp_path / "t.txt"), "--pred", str(tmp_path / "p.txt"),
        "--out", str(tmp_path / "report.json"),
    ])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["accuracy"] == pytest.approx(0.75)
    assert report["f1"] == pytest.approx(0.8)
    assert report["confusion"] == {"tp": 2, "fp": 1, "fn": 0, "tn": 1}


def test_relevance_subcommand(tmp_path):
    (tmp_path / "mask.txt").write_text("0\n512\n")
    rc = main([
        "relevance", "--mask", str(tmp_path / "mask.txt"),
        "--height", "8", "--width", "8", "--channels", "512",
        "--out", str(tmp_path / "grid.csv"),
    ])
    assert rc == 0
    grid = load_matrix_csv(tmp_path / "grid.csv")
    assert grid.shape == (8, 8)
    assert grid[0, 0] == 1 and grid[0, 1] == 1 and grid.sum() == 2


def test_select_subcommand(tmp_path):
    matrix, _, X, _, _ = _write_dataset(tmp_path)
    (tmp_path / "mask.txt").write_text("1\n3\n")
    rc = main([
        "select", "--matrix", str(matrix), "--mask", str(tmp_path / "mask.txt"),
        "--out", str(tmp_path / "sel.spfm"),
    ])
    assert rc == 0
    np.testing.assert_array_equal(load_matrix_bin(tmp_path / "sel.spfm"), X[:, [1, 3]])


# -------------------------------------------------------------- exit codes

def test_exit_code_2_for_missing_file(tmp_path, capsys):
    rc = main([
        "standardize", "--matrix", str(tmp_path / "nope.spfm"), "--out", str(tmp_path / "o.spfm"),
    ])
    assert rc == 2


def test_exit_code_2_for_bad_format(tmp_path):
    bad = tmp_path / "bad.spfm"
    bad.write_bytes(b"XXXX" + b"\x00" * 40)
    rc = main(["standardize", "--matrix", str(bad), "--out", str(tmp_path / "o.spfm")])
    assert rc == 2


def test_exit_code_1_for_contract_error(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    rc = main([
        "lasso", "--matrix", str(matrix), "--targets", str(ylab), "--lambda", "-1",
        "--out-coef", str(tmp_path / "c.spfm"), "--out-mask", str(tmp_path / "m.txt"),
    ])
    assert rc == 1


# ----------------------------------------------------------------- pipeline

def _pipeline_config(tmp_path, out_name, selector, **overrides):
    matrix, ylab, *_ = _write_dataset(tmp_path, rows=80, cols=16, informative=5)
    defaults = dict(
        matrix_path=str(matrix),
        labels_path=str(ylab),
        output_dir=str(tmp_path / out_name),
        seed=4,
        selector=selector,
        knn_k=3,
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


def test_pipeline_separable_instance_is_perfect(tmp_path):
    rng = np.random.default_rng(13)
    n_half, d = 100, 20
    X = np.vstack([
        rng.standard_normal((n_half, d)) * 0.5 - 1.0,
        rng.standard_normal((n_half, d)) * 0.5 + 1.0,
    ])
    labels = np.array([0] * n_half + [1] * n_half)
    save_matrix_bin(X, tmp_path / "X.spfm")
    save_labels(labels, tmp_path / "y.txt")
    cfg = PipelineConfig(
        matrix_path=str(tmp_path / "X.spfm"),
        labels_path=str(tmp_path / "y.txt"),
        output_dir=str(tmp_path / "out"),
        seed=3,
        selector={"kind": "none"},
        knn_k=5,
    )
    assert run_pipeline(cfg).accuracy == 1.0


def test_pipeline_deterministic_reports_and_artifacts(tmp_path):
    cfg_a = _pipeline_config(tmp_path, "run_a", {"kind": "lasso", "lambda": 0.01})
    report_a = run_pipeline(cfg_a)
    cfg_b = _pipeline_config(tmp_path, "run_b", {"kind": "lasso", "lambda": 0.01})
    report_b = run_pipeline(cfg_b)
    out_a = tmp_path / "run_a"
    out_b = tmp_path / "run_b"
    payload_a = _report_without_timings(out_a / "report.json")
    payload_b = _report_without_timings(out_b / "report.json")
    payload_a["config"].pop("output_dir")
    payload_b["config"].pop("output_dir")
    assert payload_a == payload_b
    for name in ("coefficients.spfm", "mask.txt", "predictions.txt", "standardizer.json",
                 "split_indices.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    assert report_a.accuracy == report_b.accuracy


def test_pipeline_empty_selection_aborts_and_cleans_up(tmp_path):
    cfg = _pipeline_config(tmp_path, "out", {"kind": "lasso", "lambda": 1e9})
    with pytest.raises(ContractError, match="stage select: empty feature selection"):
        run_pipeline(cfg)
    out = tmp_path / "out"
    assert not (out / "report.json").exists()
    assert not (out / "split_indices.json").exists()
    assert not (out / "standardizer.json").exists()
    assert not (out / "mask.txt").exists()


def test_pipeline_report_invariants_across_selectors(tmp_path):
    for name, selector in (
        ("lasso", {"kind": "lasso", "lambda": 0.005}),
        ("enet", {"kind": "enet", "alpha": 0.005, "l1_ratio": 0.5}),
        ("pgd_ista", {"kind": "pgd", "algo": "ista", "lambda": 0.05, "max_iter": 5000}),
        ("pgd_fista", {"kind": "pgd", "algo": "fista", "lambda": 0.05, "max_iter": 5000}),
        ("pca", {"kind": "pca", "components": 4}),
        ("kpca", {"kind": "kpca", "components": 4}),
        ("none", {"kind": "none"}),
    ):
        report = run_pipeline(_pipeline_config(tmp_path, f"out_{name}", selector))
        assert report.features_selected <= report.features_input
        assert 0.0 <= report.accuracy <= 1.0
        out = tmp_path / f"out_{name}"
        if selector["kind"] in ("lasso", "enet", "pgd"):
            coef = load_matrix_bin(out / "coefficients.spfm").reshape(-1)
            mask = load_indices(out / "mask.txt")
            assert mask.size == report.features_selected
            np.testing.assert_array_equal(mask, np.flatnonzero(np.abs(coef) > 1e-12))


def test_pipeline_oversample_balances_training_block(tmp_path):
    matrix, ylab, *_ = _write_dataset(tmp_path, rows=100, cols=10, informative=3,
                                      positive_fraction=0.2)
    cfg = PipelineConfig(
        matrix_path=str(matrix),
        labels_path=str(ylab),
        output_dir=str(tmp_path / "out"),
        seed=5,
        oversample=True,
        selector={"kind": "none"},
        knn_k=3,
    )
    report = run_pipeline(cfg)
    assert report.n_train_after_oversample > report.n_train


def test_pipeline_relevance_grid_artifact(tmp_path):
    X, labels, _ = make_synthetic(3, 50, 2 * 2 * 4, 5)
    save_matrix_bin(X, tmp_path / "X.spfm")
    save_labels(labels, tmp_path / "y.txt")
    cfg = PipelineConfig(
        matrix_path=str(tmp_path / "X.spfm"),
        labels_path=str(tmp_path / "y.txt"),
        output_dir=str(tmp_path / "out"),
        seed=6,
        selector={"kind": "lasso", "lambda": 0.001},
        knn_k=3,
        relevance_shape=(2, 2, 4),
    )
    report = run_pipeline(cfg)
    grid = load_matrix_csv(tmp_path / "out" / "relevance_grid.csv")
    assert grid.shape == (2, 2)
    assert grid.sum() == report.features_selected


def test_pipeline_annotation_label_source(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.standard_normal((6, 4))
    save_matrix_bin(X, tmp_path / "X.spfm")
    anno = tmp_path / "anno"
    anno.mkdir()
    stems = [f"img{i}" for i in range(6)]
    for i, stem in enumerate(stems):
        (anno / f"{stem}.txt").write_text("0 0.5 0.5 0.1 0.1\n" if i % 2 else "")
    (tmp_path / "manifest.txt").write_text("\n".join(stems) + "\n")
    cfg = PipelineConfig(
        matrix_path=str(tmp_path / "X.spfm"),
        annotations_dir=str(anno),
        manifest_path=str(tmp_path / "manifest.txt"),
        output_dir=str(tmp_path / "out"),
        seed=1,
        train_fraction=0.5,
        selector={"kind": "none"},
        knn_k=1,
    )
    report = run_pipeline(cfg)
    assert report.n_train + report.n_test == 6


def test_pipeline_config_validation(tmp_path):
    with pytest.raises(ContractError, match="selector"):
        PipelineConfig(matrix_path="x", output_dir="o", labels_path="y",
                       selector={"kind": "magic"}).validate()
    matrix, ylab, *_ = _write_dataset(tmp_path)
    with pytest.raises(ContractError, match="label source"):
        PipelineConfig(matrix_path=str(matrix), output_dir="o").validate()
    cfg = PipelineConfig(matrix_path=str(matrix), output_dir=str(tmp_path / "o"),
                         labels_path=str(ylab), selector={"kind": "lasso", "bogus": 1})
    with pytest.raises(ContractError, match="bogus"):
        run_pipeline(cfg)


def test_run_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    config = {
        "matrix_path": str(matrix),
        "labels_path": str(ylab),
        "seed": 2,
        "selector": {"kind": "none"},
        "knn_k": 3,
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    monkeypatch.setenv("SPARSELECT_OUTPUT_DIR", str(tmp_path / "env_out"))
    rc = main(["run", "--config", str(tmp_path / "config.json")])
    capsys.readouterr()
    assert rc == 0
    assert (tmp_path / "env_out" / "report.json").exists()
    monkeypatch.delenv("SPARSELECT_OUTPUT_DIR")
    rc = main(["run", "--config", str(tmp_path / "config.json")])
    assert rc == 1  # no output directory from any source


def test_run_subcommand_round_trip(tmp_path, capsys):
    matrix, ylab, *_ = _write_dataset(tmp_path)
    config = {
        "matrix_path": str(matrix),
        "labels_path": str(ylab),
        "output_dir": str(tmp_path / "out"),
        "seed": 2,
        "selector": {"kind": "lasso", "lambda": 0.005},
        "knn_k": 3,
    }
    (tmp_path / "config.json").write_text(json.dumps(config))
    rc = main(["run", "--config", str(tmp_path / "config.json")])
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
    assert printed == on_disk
    assert on_disk["tool_version"]
