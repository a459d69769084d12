"""L1-regularized solvers and feature-selection utilities.

Three solver families minimize the same kind of objective::

    data_term(beta) + lam * ||beta||_1            (+ 0.5 * lam2 * ||beta||_2^2)

where the data term is ``0.5/m * ||X beta - y||^2`` in ``"mean"`` scaling
(penalty weight comparable across dataset sizes, the default) or
``0.5 * ||X beta - y||^2`` in ``"sum"`` scaling.

``lasso_cd`` / ``elastic_net_cd`` run cyclic coordinate descent;
``ista`` / ``fista`` run (accelerated) proximal gradient descent and record
the objective value after every iteration. Every solver fits the system
exactly as given: none of them model an intercept, so center the targets
(and standardize the features) upstream when an offset would matter. The
mean of the passed targets is recorded as ``intercept`` for bookkeeping.

``support``, ``select_features``, and ``relevance_grid`` turn a solved
coefficient vector into a feature subset and a spatial count grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DivergenceError

SCALE_MODES = ("mean", "sum")
STEP_POLICIES = ("fixed", "lipschitz", "backtracking")

#: Relative objective increase beyond which a descent method is considered
#: divergent rather than merely stalled at float precision.
_DIVERGENCE_RTOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs.

    ``step_policy`` only matters for the proximal-gradient solvers:
    ``"fixed"`` uses ``step_size`` as given, ``"lipschitz"`` sets the step to
    the inverse of the largest eigenvalue of the (scaled) Gram matrix found
    by power iteration, and ``"backtracking"`` halves the step until the
    sufficient-decrease condition holds.
    """

    tol: float = 1e-6
    max_iter: int = 1000
    scale_mode: str = "mean"
    step_policy: str = "lipschitz"
    step_size: float | None = None
    backtrack_factor: float = 0.5

    def __post_init__(self):
        if self.tol <= 0:
            raise ContractError("tol must be positive")
        if self.max_iter <= 0:
            raise ContractError("max_iter must be positive")
        if self.scale_mode not in SCALE_MODES:
            raise ContractError(f"scale_mode must be one of {SCALE_MODES}")
        if self.step_policy not in STEP_POLICIES:
            raise ContractError(f"step_policy must be one of {STEP_POLICIES}")
        if self.step_policy == "fixed" and (self.step_size is None or self.step_size <= 0):
            raise ContractError("fixed step policy requires step_size > 0")
        if self.step_size is not None and self.step_size <= 0:
            raise ContractError("step_size must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ContractError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class CoefficientVector:
    """Solver output: weights, intercept surrogate, and convergence bookkeeping.

    ``intercept`` records the mean of the targets the solver was given; the
    solvers themselves fit no offset, so the coefficient vector alone defines
    the fitted map. ``lam`` echoes the solver's regularization constant
    (``alpha`` for the elastic net).
    """

    coef: np.ndarray
    intercept: float
    lam: float
    objective_history: tuple[float, ...]
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ElasticNetParams:
    """Combined penalty ``lam_l1 * ||b||_1 + lam_l2 / 2 * ||b||_2^2`` with
    ``lam_l1 = alpha * l1_ratio`` and ``lam_l2 = alpha * (1 - l1_ratio)``."""

    alpha: float
    l1_ratio: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ContractError("alpha must be non-negative")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ContractError("l1_ratio must lie in [0, 1]")

    @property
    def lam_l1(self) -> float:
        return self.alpha * self.l1_ratio

    @property
    def lam_l2(self) -> float:
        return self.alpha * (1.0 - self.l1_ratio)


@dataclass(frozen=True)
class FeatureMask:
    """Strictly increasing indices of selected features out of ``source_dim``."""

    selected: np.ndarray
    source_dim: int

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=np.int64).reshape(-1)
        if selected.size:
            if selected.min() < 0 or selected.max() >= self.source_dim:
                raise ContractError(
                    f"mask indices must lie in [0, {self.source_dim})"
                )
            if np.any(np.diff(selected) <= 0):
                raise ContractError("mask indices must be strictly increasing")
        object.__setattr__(self, "selected", selected)

    def __len__(self) -> int:
        return int(self.selected.size)


def soft_threshold(z, t):
    """Shrink toward zero: ``sign(z) * max(|z| - t, 0)``; works elementwise."""
    if t < 0:
        raise ContractError("threshold must be non-negative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _validate_problem(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2:
        raise ContractError(f"design matrix must be 2-D, got {X.ndim}-D")
    if y.shape[0] != X.shape[0]:
        raise ContractError(
            f"matrix has {X.shape[0]} rows but targets have {y.shape[0]} entries"
        )
    if X.shape[0] == 0:
        raise ContractError("need at least one sample")
    if not np.isfinite(X).all():
        raise ContractError("design matrix contains non-finite values")
    if y.size and not np.isfinite(y).all():
        raise ContractError("targets contain non-finite values")
    return X, y


def _scale_factor(m: int, scale_mode: str) -> float:
    if scale_mode == "mean":
        return 1.0 / m
    if scale_mode == "sum":
        return 1.0
    raise ContractError(f"scale_mode must be one of {SCALE_MODES}")


def lasso_objective(X, y, beta, lam: float, scale_mode: str = "mean") -> float:
    """Value of the L1-penalized least-squares objective at ``beta``."""
    X, y = _validate_problem(X, y)
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    if beta.shape[0] != X.shape[1]:
        raise ContractError(
            f"matrix has {X.shape[1]} columns but beta has {beta.shape[0]} entries"
        )
    if lam < 0:
        raise ContractError("lam must be non-negative")
    scale = _scale_factor(X.shape[0], scale_mode)
    residual = X @ beta - y
    return 0.5 * scale * float(residual @ residual) + lam * float(np.abs(beta).sum())


def _cd_engine(X, y, lam_l1: float, lam_l2: float, cfg: SolverConfig):
    """Cyclic coordinate descent.

    Coordinate update: ``beta_j = S(rho_j, lam_l1) / (z_j + lam_l2)`` with
    ``rho_j`` the scaled correlation of column j against the partial residual
    and ``z_j`` the scaled column squared norm. All-zero columns stay at 0.
    """
    X, y = _validate_problem(X, y)
    if lam_l1 < 0 or lam_l2 < 0:
        raise ContractError("penalty weights must be non-negative")
    m, d = X.shape
    scale = _scale_factor(m, cfg.scale_mode)
    intercept = float(y.mean())
    beta = np.zeros(d, dtype=np.float64)
    residual = y.copy()  # y - X @ beta at beta == 0
    col_sq = np.einsum("ij,ij->j", X, X) * scale
    history: list[float] = []
    converged = False
    sweeps = 0
    for _ in range(cfg.max_iter):
        sweeps += 1
        max_delta = 0.0
        for j in range(d):
            zj = col_sq[j]
            if zj == 0.0:
                continue
            old = beta[j]
            xj = X[:, j]
            if old != 0.0:
                residual += xj * old
            rho = scale * float(xj @ residual)
            new = float(soft_threshold(rho, lam_l1)) / (zj + lam_l2)
            if new != 0.0:
                residual -= xj * new
            beta[j] = new
            delta = abs(new - old)
            if delta > max_delta:
                max_delta = delta
        obj = (
            0.5 * scale * float(residual @ residual)
            + lam_l1 * float(np.abs(beta).sum())
            + 0.5 * lam_l2 * float(beta @ beta)
        )
        history.append(obj)
        if max_delta < cfg.tol:
            converged = True
            break
    return beta, intercept, tuple(history), sweeps, converged


def lasso_cd(X, y, lam: float, cfg: SolverConfig | None = None) -> CoefficientVector:
    """Coordinate-descent solver for the L1-penalized least-squares problem."""
    if lam < 0:
        raise ContractError("lam must be non-negative")
    cfg = cfg or SolverConfig()
    beta, intercept, history, sweeps, converged = _cd_engine(X, y, lam, 0.0, cfg)
    return CoefficientVector(beta, intercept, float(lam), history, sweeps, converged)


def elastic_net_cd(
    X, y, params: ElasticNetParams, cfg: SolverConfig | None = None
) -> CoefficientVector:
    """Coordinate-descent solver for the combined L1 + L2 penalty.

    With ``l1_ratio == 1`` this runs the identical update sequence as
    ``lasso_cd(X, y, params.alpha)``.
    """
    cfg = cfg or SolverConfig()
    beta, intercept, history, sweeps, converged = _cd_engine(
        X, y, params.lam_l1, params.lam_l2, cfg
    )
    return CoefficientVector(beta, intercept, float(params.alpha), history, sweeps, converged)


def largest_gram_eigenvalue(A, max_iter: int = 100, tol: float = 1e-8) -> float:
    """Largest eigenvalue of ``A^T A`` by power iteration from a fixed start."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ContractError("expected a 2-D matrix")
    d = A.shape[1]
    if d == 0 or A.shape[0] == 0:
        return 0.0
    v = np.full(d, 1.0 / math.sqrt(d))
    eig = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        new_eig = float(v @ w)  # Rayleigh quotient; v is unit-norm
        v = w / norm
        if abs(new_eig - eig) <= tol * max(1.0, abs(new_eig)):
            return new_eig
        eig = new_eig
    return eig


def _initial_step(A, lam: float, cfg: SolverConfig, scale: float) -> float:
    if cfg.step_policy == "fixed":
        return float(cfg.step_size)
    if cfg.step_policy == "lipschitz":
        lip = scale * largest_gram_eigenvalue(A)
        return 1.0 / lip if lip > 0.0 else 1.0
    return float(cfg.step_size) if cfg.step_size else 1.0


def _backtrack_step(A, b, point, grad, residual, lam, step, factor, scale):
    """Halve the step until the quadratic upper bound at ``point`` holds."""
    f_point = 0.5 * scale * float(residual @ residual)
    for _ in range(200):
        cand = soft_threshold(point - step * grad, step * lam)
        diff = cand - point
        r_cand = A @ cand - b
        f_cand = 0.5 * scale * float(r_cand @ r_cand)
        bound = f_point + float(grad @ diff) + float(diff @ diff) / (2.0 * step)
        if f_cand <= bound + 1e-15 * max(1.0, abs(bound)):
            return cand, r_cand, step
        step *= factor
    raise ContractError("backtracking line search failed to find a usable step")


def ista(A, b, lam: float, cfg: SolverConfig | None = None) -> CoefficientVector:
    """Proximal gradient descent: gradient step on the smooth squared error,
    then elementwise soft-thresholding.

    The recorded objective history is nonincreasing. An iterate that fails
    to improve the objective beyond float precision ends the run; a material
    increase (possible when a fixed step is too large) raises
    ``DivergenceError`` naming the iteration.
    """
    if lam < 0:
        raise ContractError("lam must be non-negative")
    cfg = cfg or SolverConfig()
    A, b = _validate_problem(A, b)
    m, d = A.shape
    scale = _scale_factor(m, cfg.scale_mode)
    step = _initial_step(A, lam, cfg, scale)

    x = np.zeros(d, dtype=np.float64)
    residual = -b.copy()  # A @ x - b at x == 0
    f_prev = 0.5 * scale * float(residual @ residual)
    history: list[float] = []
    converged = False
    iterations = 0
    for it in range(1, cfg.max_iter + 1):
        iterations = it
        grad = scale * (A.T @ residual)
        if cfg.step_policy == "backtracking":
            x_new, r_new, step = _backtrack_step(
                A, b, x, grad, residual, lam, step, cfg.backtrack_factor, scale
            )
        else:
            x_new = soft_threshold(x - step * grad, step * lam)
            r_new = A @ x_new - b
        f_new = 0.5 * scale * float(r_new @ r_new) + lam * float(np.abs(x_new).sum())
        if not math.isfinite(f_new):
            raise DivergenceError(f"objective became non-finite at iteration {it}")
        if f_new > f_prev:
            if f_new > f_prev + _DIVERGENCE_RTOL * max(1.0, abs(f_prev)):
                raise DivergenceError(
                    f"objective increased at iteration {it} "
                    f"({f_prev:.9e} -> {f_new:.9e}); step size too large"
                )
            # Descent exhausted at float precision: keep the previous iterate.
            iterations = it - 1
            converged = True
            break
        delta = float(np.max(np.abs(x_new - x))) if d else 0.0
        x = x_new
        residual = r_new
        f_prev = f_new
        history.append(f_new)
        if delta < cfg.tol:
            converged = True
            break
    if not history:
        history.append(f_prev)
    return CoefficientVector(
        x, float(b.mean()), float(lam), tuple(history), iterations, converged
    )


def fista(A, b, lam: float, cfg: SolverConfig | None = None) -> CoefficientVector:
    """Nesterov-accelerated proximal gradient descent.

    Requires the lipschitz or backtracking step policy. The objective
    history records the value at every iterate and, unlike ``ista``, may be
    non-monotone; at matching tolerances the final objective is no worse.
    """
    if lam < 0:
        raise ContractError("lam must be non-negative")
    cfg = cfg or SolverConfig()
    if cfg.step_policy == "fixed":
        raise ContractError("fista requires the lipschitz or backtracking step policy")
    A, b = _validate_problem(A, b)
    m, d = A.shape
    scale = _scale_factor(m, cfg.scale_mode)
    step = _initial_step(A, lam, cfg, scale)

    x = np.zeros(d, dtype=np.float64)
    r_x = -b.copy()  # residual at x
    point = x.copy()  # extrapolated point
    r_point = r_x.copy()
    theta = 1.0
    history: list[float] = []
    converged = False
    iterations = 0
    for it in range(1, cfg.max_iter + 1):
        iterations = it
        grad = scale * (A.T @ r_point)
        if cfg.step_policy == "backtracking":
            x_new, r_new, step = _backtrack_step(
                A, b, point, grad, r_point, lam, step, cfg.backtrack_factor, scale
            )
        else:
            x_new = soft_threshold(point - step * grad, step * lam)
            r_new = A @ x_new - b
        f_new = 0.5 * scale * float(r_new @ r_new) + lam * float(np.abs(x_new).sum())
        if not math.isfinite(f_new):
            raise DivergenceError(f"objective became non-finite at iteration {it}")
        history.append(f_new)
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        momentum = (theta - 1.0) / theta_new
        point = x_new + momentum * (x_new - x)
        r_point = r_new + momentum * (r_new - r_x)  # residual is affine in x
        delta = float(np.max(np.abs(x_new - x))) if d else 0.0
        x = x_new
        r_x = r_new
        theta = theta_new
        if delta < cfg.tol:
            converged = True
            break
    if not history:
        history.append(0.5 * scale * float(r_x @ r_x) + lam * float(np.abs(x).sum()))
    return CoefficientVector(
        x, float(b.mean()), float(lam), tuple(history), iterations, converged
    )


def gradient_smooth(A, b, x) -> np.ndarray:
    """Gradient of the unscaled smooth term: ``A^T (A x - b)``."""
    A, b = _validate_problem(A, b)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != A.shape[1]:
        raise ContractError(
            f"matrix has {A.shape[1]} columns but x has {x.shape[0]} entries"
        )
    return A.T @ (A @ x - b)


def support(c: CoefficientVector, zero_tol: float = 1e-12) -> FeatureMask:
    """Indices of coefficients whose magnitude exceeds ``zero_tol``, ascending."""
    if zero_tol < 0:
        raise ContractError("zero_tol must be non-negative")
    idx = np.flatnonzero(np.abs(c.coef) > zero_tol)
    return FeatureMask(idx, int(np.asarray(c.coef).shape[0]))


def select_features(X, mask: FeatureMask) -> np.ndarray:
    """Keep only the masked columns, preserving row count and mask order."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ContractError("expected a 2-D matrix")
    if mask.source_dim != X.shape[1]:
        raise ContractError(
            f"mask covers {mask.source_dim} features but matrix has {X.shape[1]} columns"
        )
    return np.ascontiguousarray(X[:, mask.selected])


def relevance_grid(mask: FeatureMask, shape: tuple[int, int, int]) -> np.ndarray:
    """Count selected features per spatial cell of a (height, width, channels)
    feature map flattened in (row, col, channel) row-major order."""
    if len(shape) != 3:
        raise ContractError("shape must be (height, width, channels)")
    height, width, channels = (int(v) for v in shape)
    if height <= 0 or width <= 0 or channels <= 0:
        raise ContractError("shape entries must be positive")
    if mask.source_dim != height * width * channels:
        raise ContractError(
            f"mask covers {mask.source_dim} features but shape implies "
            f"{height * width * channels}"
        )
    cells = mask.selected // channels
    counts = np.bincount(cells, minlength=height * width).astype(np.float64)
    return counts.reshape(height, width)
