"""Config-driven end-to-end pipeline.

Stage order: load -> labels -> split -> oversample (train only, optional)
-> standardize (fit on train, apply to both) -> select -> classify ->
evaluate. Every artifact lands in the configured output directory; on any
stage failure the partially written artifacts are removed and the error is
re-raised prefixed with the stage name.

With a fixed seed, everything downstream of the config is deterministic:
re-running produces byte-identical artifacts and a byte-identical report
except for the ``timings_seconds`` block.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ContractError, SparselectError
from .metrics import accuracy, confusion, f1, precision, recall
from .neighbors import knn_fit, knn_predict
from .preprocess import (
    Dataset,
    SplitSpec,
    apply_standardizer,
    fit_standardizer,
    labels_from_annotations,
    random_oversample,
    save_stats,
    split_indices,
)
from .sparse import (
    ElasticNetParams,
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
    load_labels,
    load_matrix_bin,
    load_matrix_csv,
    save_indices,
    save_labels,
    save_matrix_bin,
    save_matrix_csv,
)

SELECTOR_KINDS = ("lasso", "enet", "pgd", "pca", "kpca", "none")


def load_matrix_any(path, csv_has_header: bool = False) -> np.ndarray:
    """Load a matrix by extension: ``.csv`` as text, anything else as binary."""
    if str(path).endswith(".csv"):
        return load_matrix_csv(path, has_header=csv_has_header)
    return load_matrix_bin(path)


@dataclass
class PipelineConfig:
    matrix_path: str
    output_dir: str | None = None
    labels_path: str | None = None
    annotations_dir: str | None = None
    manifest_path: str | None = None
    csv_has_header: bool = False
    seed: int = 0
    train_fraction: float = 0.8
    stratified: bool = True
    oversample: bool = False
    selector: dict = field(default_factory=lambda: {"kind": "none"})
    knn_k: int = 5
    zero_tol: float = 1e-12
    epsilon: float = 1e-12
    relevance_shape: tuple[int, int, int] | None = None

    @classmethod
    def from_json_file(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ContractError(f"unknown config keys: {sorted(unknown)}")
        if "relevance_shape" in raw and raw["relevance_shape"] is not None:
            raw["relevance_shape"] = tuple(int(v) for v in raw["relevance_shape"])
        return cls(**raw)

    def validate(self) -> None:
        if not self.output_dir:
            raise ContractError(
                "no output directory: set output_dir in the config, pass "
                "--output-dir, or export SPARSELECT_OUTPUT_DIR"
            )
        if not isinstance(self.selector, dict) or "kind" not in self.selector:
            raise ContractError("selector must be a mapping with a 'kind' key")
        if self.selector["kind"] not in SELECTOR_KINDS:
            raise ContractError(
                f"selector kind must be one of {SELECTOR_KINDS}, "
                f"got {self.selector['kind']!r}"
            )
        if not Path(self.matrix_path).exists():
            raise ContractError(f"matrix path does not exist: {self.matrix_path}")
        has_labels = self.labels_path is not None
        has_annotations = self.annotations_dir is not None and self.manifest_path is not None
        if has_labels == has_annotations:
            raise ContractError(
                "exactly one label source required: labels_path, or "
                "annotations_dir with manifest_path"
            )
        for name, path in (
            ("labels_path", self.labels_path),
            ("annotations_dir", self.annotations_dir),
            ("manifest_path", self.manifest_path),
        ):
            if path is not None and not Path(path).exists():
                raise ContractError(f"{name} does not exist: {path}")
        if self.knn_k < 1:
            raise ContractError("knn_k must be at least 1")
        if self.relevance_shape is not None and len(self.relevance_shape) != 3:
            raise ContractError("relevance_shape must be (height, width, channels)")

    def echo(self) -> dict:
        return {
            "matrix_path": self.matrix_path,
            "output_dir": self.output_dir,
            "labels_path": self.labels_path,
            "annotations_dir": self.annotations_dir,
            "manifest_path": self.manifest_path,
            "csv_has_header": self.csv_has_header,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
            "stratified": self.stratified,
            "oversample": self.oversample,
            "selector": dict(self.selector),
            "knn_k": self.knn_k,
            "zero_tol": self.zero_tol,
            "epsilon": self.epsilon,
            "relevance_shape": list(self.relevance_shape)
            if self.relevance_shape is not None
            else None,
        }


@dataclass
class RunReport:
    tool_version: str
    config: dict
    timings_seconds: dict
    n_train: int
    n_test: int
    n_train_after_oversample: int
    features_input: int
    features_selected: int
    selector: dict
    confusion: dict
    accuracy: float
    precision: float
    recall: float
    f1: float
    artifacts: dict

    def to_json(self) -> str:
        payload = {
            "tool_version": self.tool_version,
            "config": self.config,
            "timings_seconds": self.timings_seconds,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "n_train_after_oversample": self.n_train_after_oversample,
            "features_input": self.features_input,
            "features_selected": self.features_selected,
            "selector": self.selector,
            "confusion": self.confusion,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "artifacts": self.artifacts,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _solver_config(params: dict, default_scale: str) -> SolverConfig:
    return SolverConfig(
        tol=float(params.pop("tol", 1e-6)),
        max_iter=int(params.pop("max_iter", 1000)),
        scale_mode=str(params.pop("scale_mode", default_scale)),
        step_policy=str(params.pop("step_policy", "lipschitz")),
        step_size=params.pop("step_size", None),
        backtrack_factor=float(params.pop("backtrack_factor", 0.5)),
    )


def _reject_leftovers(kind: str, params: dict) -> None:
    if params:
        raise ContractError(f"unknown {kind} selector options: {sorted(params)}")


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    cfg.validate()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    timings: dict[str, float] = {}
    artifacts: dict[str, str] = {}

    def track(name: str, path: Path) -> Path:
        created.append(path)
        artifacts[name] = str(path.relative_to(out_dir))
        return path

    @contextmanager
    def stage(name: str):
        start = time.perf_counter()
        try:
            yield
        except SparselectError as exc:
            raise type(exc)(f"stage {name}: {exc}") from exc
        finally:
            timings[name] = time.perf_counter() - start

    try:
        with stage("load"):
            X = load_matrix_any(cfg.matrix_path, cfg.csv_has_header)

        with stage("labels"):
            if cfg.labels_path is not None:
                labels = load_labels(cfg.labels_path)
            else:
                labels = labels_from_annotations(cfg.annotations_dir, cfg.manifest_path)
            data = Dataset(X, labels)

        with stage("split"):
            spec = SplitSpec(cfg.train_fraction, cfg.seed, cfg.stratified)
            train_idx, test_idx = split_indices(data.labels, spec)
            split_path = track("split_indices", out_dir / "split_indices.json")
            split_path.write_text(
                json.dumps(
                    {
                        "train_indices": [int(i) for i in train_idx],
                        "test_indices": [int(i) for i in test_idx],
                    },
                    sort_keys=True,
                )
                + "\n",
                encoding="utf-8",
            )
            train = Dataset(data.features[train_idx], data.labels[train_idx])
            test = Dataset(data.features[test_idx], data.labels[test_idx])

        with stage("oversample"):
            if cfg.oversample:
                train = random_oversample(train, cfg.seed)

        with stage("standardize"):
            stats = fit_standardizer(train.features, cfg.epsilon)
            X_train = apply_standardizer(train.features, stats)
            X_test = apply_standardizer(test.features, stats)
            save_stats(stats, track("standardizer", out_dir / "standardizer.json"))

        with stage("select"):
            X_train_sel, X_test_sel, selector_report = _apply_selector(
                cfg, X_train, X_test, train.labels, out_dir, track
            )

        with stage("classify"):
            model = knn_fit(X_train_sel, train.labels, cfg.knn_k)
            predictions = knn_predict(model, X_test_sel)
            save_labels(predictions, track("predictions", out_dir / "predictions.txt"))

        with stage("evaluate"):
            cm = confusion(test.labels, predictions)
            report = RunReport(
                tool_version=__version__,
                config=cfg.echo(),
                timings_seconds=timings,
                n_train=int(train_idx.size),
                n_test=int(test_idx.size),
                n_train_after_oversample=train.n_rows,
                features_input=int(X.shape[1]),
                features_selected=int(X_train_sel.shape[1]),
                selector=selector_report,
                confusion={"tp": cm.tp, "fp": cm.fp, "fn": cm.fn, "tn": cm.tn},
                accuracy=accuracy(cm),
                precision=precision(cm),
                recall=recall(cm),
                f1=f1(cm),
                artifacts=artifacts,
            )

        report_path = track("report", out_dir / "report.json")
        report_path.write_text(report.to_json(), encoding="utf-8")
        return report
    except Exception:
        for path in created:
            path.unlink(missing_ok=True)
        raise


def _apply_selector(cfg, X_train, X_test, y_train, out_dir, track):
    """Fit the configured selector on the training block, transform both
    blocks, and write the selector's artifacts. Returns the transformed
    blocks and a report fragment."""
    params = dict(cfg.selector)
    kind = params.pop("kind")

    if kind == "none":
        _reject_leftovers(kind, params)
        return X_train, X_test, {"kind": "none"}

    if kind in ("lasso", "enet", "pgd"):
        # Labels become real-valued regression targets; the solvers fit no
        # intercept, so center here.
        target = y_train.astype(np.float64)
        target = target - target.mean()
        if kind == "lasso":
            lam = float(params.pop("lambda", 0.01))
            solver_cfg = _solver_config(params, default_scale="mean")
            _reject_leftovers(kind, params)
            result = lasso_cd(X_train, target, lam, solver_cfg)
        elif kind == "enet":
            enet_params = ElasticNetParams(
                alpha=float(params.pop("alpha", 0.01)),
                l1_ratio=float(params.pop("l1_ratio", 0.5)),
            )
            solver_cfg = _solver_config(params, default_scale="mean")
            _reject_leftovers(kind, params)
            result = elastic_net_cd(X_train, target, enet_params, solver_cfg)
        else:
            algo = str(params.pop("algo", "ista"))
            lam = float(params.pop("lambda", 0.1))
            solver_cfg = _solver_config(params, default_scale="sum")
            _reject_leftovers(kind, params)
            if algo not in ("ista", "fista"):
                raise ContractError(f"pgd algo must be 'ista' or 'fista', got {algo!r}")
            solve = ista if algo == "ista" else fista
            result = solve(X_train, target, lam, solver_cfg)
        mask = support(result, cfg.zero_tol)
        if len(mask) == 0:
            raise ContractError("empty feature selection")
        save_matrix_bin(result.coef.reshape(1, -1), track("coefficients", out_dir / "coefficients.spfm"))
        save_indices(mask.selected, track("mask", out_dir / "mask.txt"))
        _write_history(result.objective_history, track("objective_history", out_dir / "objective_history.csv"))
        if cfg.relevance_shape is not None:
            grid = relevance_grid(mask, cfg.relevance_shape)
            save_matrix_csv(grid, track("relevance_grid", out_dir / "relevance_grid.csv"))
        selector_report = {
            "kind": kind,
            "iterations": result.iterations,
            "final_objective": result.objective_history[-1],
            "converged": result.converged,
            "selected": len(mask),
        }
        return (
            select_features(X_train, mask),
            select_features(X_test, mask),
            selector_report,
        )

    if kind == "pca":
        k = int(params.pop("components", 2))
        _reject_leftovers(kind, params)
        model = pca_fit(X_train, k)
        model_dir = out_dir / "pca_model"
        save_pca(model, model_dir)
        for child in sorted(model_dir.iterdir()):
            track(f"pca_model/{child.name}", child)
        return (
            pca_transform(X_train, model),
            pca_transform(X_test, model),
            {"kind": "pca", "components": model.k},
        )

    if kind == "kpca":
        k = int(params.pop("components", 2))
        gamma = params.pop("gamma", None)
        kernel = str(params.pop("kernel", "rbf"))
        _reject_leftovers(kind, params)
        model = kpca_fit(X_train, k, gamma=None if gamma is None else float(gamma), kernel=kernel)
        model_dir = out_dir / "kpca_model"
        save_kpca(model, model_dir)
        for child in sorted(model_dir.iterdir()):
            track(f"kpca_model/{child.name}", child)
        return (
            kpca_transform(X_train, model),
            kpca_transform(X_test, model),
            {"kind": "kpca", "components": model.k, "gamma": model.gamma},
        )

    raise ContractError(f"unknown selector kind {kind!r}")


def _write_history(history, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,objective\n")
        for i, value in enumerate(history, start=1):
            fh.write(f"{i},{value!r}\n")


def make_synthetic(
    seed: int,
    n_rows: int,
    n_cols: int,
    n_informative: int,
    noise: float = 0.01,
    positive_fraction: float = 0.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded sparse-linear-model generator with label thresholding.

    Standard-normal features, a sparse weight vector on ``n_informative``
    random coordinates (magnitudes in [1, 2], random signs), Gaussian score
    noise, and binary labels from thresholding the score at the quantile
    giving ``positive_fraction`` positives. Returns (features, labels, true
    weights).
    """
    if not 1 <= n_informative <= n_cols:
        raise ContractError("n_informative must lie in [1, n_cols]")
    if not 0.0 < positive_fraction < 1.0:
        raise ContractError("positive_fraction must lie in (0, 1)")
    if noise < 0:
        raise ContractError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, n_cols))
    support_idx = np.sort(rng.choice(n_cols, size=n_informative, replace=False))
    weights = np.zeros(n_cols)
    weights[support_idx] = rng.uniform(1.0, 2.0, size=n_informative) * rng.choice(
        (-1.0, 1.0), size=n_informative
    )
    score = X @ weights + noise * rng.standard_normal(n_rows)
    cut = float(np.quantile(score, 1.0 - positive_fraction))
    labels = (score > cut).astype(np.int64)
    return X, labels, weights
