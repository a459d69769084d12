"""Command-line interface.

One subcommand per operation plus ``run`` for the full config-driven
pipeline and ``synth`` for the bundled synthetic-data generator. Matrix
arguments are loaded by extension (``.csv`` as text, anything else in the
binary format) and written the same way.

Exit codes: 0 success, 1 contract or validation error, 2 I/O or file-format
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, ParseError, SparselectError
from .metrics import accuracy, confusion, f1, precision, recall
from .neighbors import knn_fit, knn_predict
from .pipeline import (
    PipelineConfig,
    load_matrix_any,
    make_synthetic,
    run_pipeline,
)
from .preprocess import (
    Dataset,
    SplitSpec,
    apply_standardizer,
    fit_standardizer,
    load_stats,
    random_oversample,
    save_stats,
    train_test_split,
)
from .sparse import (
    ElasticNetParams,
    FeatureMask,
    SolverConfig,
    elastic_net_cd,
    fista,
    ista,
    lasso_cd,
    relevance_grid,
    select_features,
    support,
)
from .dimred import kpca_fit, kpca_transform, pca_fit, pca_transform, save_kpca, save_pca
from .tensorio import (
    load_indices,
    load_labels,
    save_indices,
    save_labels,
    save_matrix_bin,
    save_matrix_csv,
)


def _save_matrix_any(matrix, path) -> None:
    if str(path).endswith(".csv"):
        save_matrix_csv(matrix, path)
    else:
        save_matrix_bin(matrix, path)


def _load_targets(path) -> np.ndarray:
    """One decimal value per line; accepts integer label files and real targets."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    values = np.empty(len(lines), dtype=np.float64)
    for i, line in enumerate(lines):
        text = line.strip()
        try:
            values[i] = float(text)
        except ValueError:
            raise ParseError(f"{path}: line {i + 1}: not a number: {text!r}") from None
        if not np.isfinite(values[i]):
            raise ParseError(f"{path}: line {i + 1}: non-finite value {text!r}")
    return values


def _solver_config_from_args(args, default_scale: str) -> SolverConfig:
    return SolverConfig(
        tol=args.tol,
        max_iter=args.max_iter,
        scale_mode=args.scale_mode or default_scale,
        step_policy=getattr(args, "step_policy", "lipschitz"),
        step_size=getattr(args, "step_size", None),
    )


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=1e-6, help="stopping tolerance on the max coordinate change (default 1e-6)")
    parser.add_argument("--max-iter", type=int, default=1000, help="iteration cap (default 1000)")
    parser.add_argument("--scale-mode", choices=("mean", "sum"), default=None, help="data-term scaling (default: mean for lasso/enet, sum for pgd)")


def _write_solver_outputs(result, args) -> None:
    save_matrix_bin(result.coef.reshape(1, -1), args.out_coef)
    mask = support(result, args.zero_tol)
    save_indices(mask.selected, args.out_mask)
    if args.out_history:
        with open(args.out_history, "w", encoding="utf-8") as fh:
            fh.write("iteration,objective\n")
            for i, value in enumerate(result.objective_history, start=1):
                fh.write(f"{i},{value!r}\n")
    print(
        f"selected {len(mask)} of {result.coef.shape[0]} features "
        f"({result.iterations} iterations, converged={result.converged})"
    )


def _cmd_standardize(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    if args.stats:
        stats = load_stats(args.stats)
    else:
        stats = fit_standardizer(X, args.epsilon)
    if args.save_stats:
        save_stats(stats, args.save_stats)
    _save_matrix_any(apply_standardizer(X, stats), args.out)


def _cmd_oversample(args) -> None:
    data = Dataset(load_matrix_any(args.matrix, args.has_header), load_labels(args.labels))
    balanced = random_oversample(data, args.seed)
    _save_matrix_any(balanced.features, args.out_matrix)
    save_labels(balanced.labels, args.out_labels)


def _cmd_split(args) -> None:
    data = Dataset(load_matrix_any(args.matrix, args.has_header), load_labels(args.labels))
    spec = SplitSpec(args.train_fraction, args.seed, not args.no_stratify)
    train, test = train_test_split(data, spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_bin(train.features, out / "train_matrix.spfm")
    save_labels(train.labels, out / "train_labels.txt")
    save_matrix_bin(test.features, out / "test_matrix.spfm")
    save_labels(test.labels, out / "test_labels.txt")


def _cmd_lasso(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    y = _load_targets(args.targets)
    result = lasso_cd(X, y, args.lam, _solver_config_from_args(args, "mean"))
    _write_solver_outputs(result, args)


def _cmd_enet(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    y = _load_targets(args.targets)
    params = ElasticNetParams(args.alpha, args.l1_ratio)
    result = elastic_net_cd(X, y, params, _solver_config_from_args(args, "mean"))
    _write_solver_outputs(result, args)


def _cmd_pgd(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    y = _load_targets(args.targets)
    solver_cfg = _solver_config_from_args(args, "sum")
    solve = ista if args.algo == "ista" else fista
    result = solve(X, y, args.lam, solver_cfg)
    _write_solver_outputs(result, args)


def _cmd_pca(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    model = pca_fit(X, args.components)
    save_pca(model, args.out_model)
    if args.out_transformed:
        _save_matrix_any(pca_transform(X, model), args.out_transformed)


def _cmd_kpca(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    model = kpca_fit(X, args.components, gamma=args.gamma, kernel=args.kernel)
    save_kpca(model, args.out_model)
    if args.out_transformed:
        _save_matrix_any(kpca_transform(X, model), args.out_transformed)


def _cmd_knn(args) -> None:
    model = knn_fit(
        load_matrix_any(args.train_matrix, args.has_header),
        load_labels(args.train_labels),
        args.k,
    )
    predictions = knn_predict(model, load_matrix_any(args.query_matrix, args.has_header))
    save_labels(predictions, args.out)


def _cmd_eval(args) -> None:
    cm = confusion(load_labels(args.truth), load_labels(args.pred))
    report = {
        "confusion": {"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
        "accuracy": accuracy(cm),
        "precision": precision(cm),
        "recall": recall(cm),
        "f1": f1(cm),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")


def _cmd_relevance(args) -> None:
    indices = load_indices(args.mask)
    shape = (args.height, args.width, args.channels)
    mask = FeatureMask(indices, shape[0] * shape[1] * shape[2])
    save_matrix_csv(relevance_grid(mask, shape), args.out)


def _cmd_select(args) -> None:
    X = load_matrix_any(args.matrix, args.has_header)
    mask = FeatureMask(load_indices(args.mask), X.shape[1])
    _save_matrix_any(select_features(X, mask), args.out)


def _cmd_synth(args) -> None:
    X, labels, weights = make_synthetic(
        args.seed, args.rows, args.cols, args.informative, args.noise, args.positive_fraction
    )
    _save_matrix_any(X, args.out_matrix)
    save_labels(labels, args.out_labels)
    if args.out_weights:
        save_matrix_bin(weights.reshape(1, -1), args.out_weights)
    if args.out_support:
        save_indices(np.flatnonzero(weights != 0.0), args.out_support)


def _cmd_run(args) -> None:
    cfg = PipelineConfig.from_json_file(args.config)
    # precedence: flag, then config, then environment
    cfg.output_dir = (
        args.output_dir or cfg.output_dir or os.environ.get("SPARSELECT_OUTPUT_DIR")
    )
    report = run_pipeline(cfg)
    print(report.to_json(), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparselect",
        description="Sparse-modeling feature selection toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def add_matrix_flag(p, flag="--matrix"):
        p.add_argument(flag, required=True, help="input matrix (.csv or binary)")
        p.add_argument("--has-header", action="store_true", help="skip the first CSV row")

    p = add("standardize", _cmd_standardize, "center/scale columns with train statistics")
    add_matrix_flag(p)
    p.add_argument("--out", required=True, help="output matrix path")
    p.add_argument("--stats", help="load previously saved statistics instead of fitting")
    p.add_argument("--save-stats", help="write fitted statistics to this JSON path")
    p.add_argument("--epsilon", type=float, default=1e-12, help="divisor floor (default 1e-12)")

    p = add("oversample", _cmd_oversample, "balance classes by duplicating minority rows")
    add_matrix_flag(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-matrix", required=True)
    p.add_argument("--out-labels", required=True)

    p = add("split", _cmd_split, "deterministic train/test split")
    add_matrix_flag(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-stratify", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = add("lasso", _cmd_lasso, "L1-penalized least squares by coordinate descent")
    add_matrix_flag(p)
    p.add_argument("--targets", required=True, help="target values, one per line")
    p.add_argument("--lambda", dest="lam", type=float, default=0.01, help="L1 penalty weight (default 0.01)")
    _add_solver_flags(p)
    p.add_argument("--zero-tol", type=float, default=1e-12)
    p.add_argument("--out-coef", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-history", help="objective per sweep as CSV")

    p = add("enet", _cmd_enet, "elastic-net regression by coordinate descent")
    add_matrix_flag(p)
    p.add_argument("--targets", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--l1-ratio", type=float, default=0.5)
    _add_solver_flags(p)
    p.add_argument("--zero-tol", type=float, default=1e-12)
    p.add_argument("--out-coef", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-history", help="objective per sweep as CSV")

    p = add("pgd", _cmd_pgd, "proximal gradient descent (plain or accelerated)")
    add_matrix_flag(p)
    p.add_argument("--targets", required=True)
    p.add_argument("--algo", choices=("ista", "fista"), default="ista")
    p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="L1 penalty weight (default 0.1)")
    p.add_argument("--step-policy", choices=("fixed", "lipschitz", "backtracking"), default="lipschitz")
    p.add_argument("--step-size", type=float, default=None, help="step for the fixed policy")
    _add_solver_flags(p)
    p.add_argument("--zero-tol", type=float, default=1e-12)
    p.add_argument("--out-coef", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-history", help="objective per iteration as CSV")

    p = add("pca", _cmd_pca, "principal component analysis")
    add_matrix_flag(p)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--out-model", required=True, help="model output directory")
    p.add_argument("--out-transformed", help="optionally write the projected matrix")

    p = add("kpca", _cmd_kpca, "RBF kernel principal component analysis")
    add_matrix_flag(p)
    p.add_argument("--components", type=int, required=True)
    p.add_argument("--gamma", type=float, default=None, help="RBF width (default 1/n_features)")
    p.add_argument("--kernel", choices=("rbf", "linear"), default="rbf")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-transformed", help="optionally write the projected matrix")

    p = add("knn", _cmd_knn, "brute-force k-nearest-neighbors prediction")
    p.add_argument("--train-matrix", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--query-matrix", required=True)
    p.add_argument("--has-header", action="store_true")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", required=True, help="predictions, one label per line")

    p = add("eval", _cmd_eval, "confusion matrix and binary metrics")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", help="optionally write the JSON report")

    p = add("relevance", _cmd_relevance, "spatial count grid for a feature mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--out", required=True, help="grid CSV (height x width)")

    p = add("select", _cmd_select, "keep only the columns named by a mask file")
    add_matrix_flag(p)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)

    p = add("synth", _cmd_synth, "seeded synthetic dataset (sparse linear model)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--informative", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--positive-fraction", type=float, default=0.5)
    p.add_argument("--out-matrix", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-weights", help="true weight vector as a 1-row matrix")
    p.add_argument("--out-support", help="true support indices, one per line")

    p = add("run", _cmd_run, "execute the full pipeline from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument(
        "--output-dir",
        help="override the config's output directory "
        "(falls back to $SPARSELECT_OUTPUT_DIR)",
    )

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SparselectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
