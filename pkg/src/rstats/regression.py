"""Outlier-robust least-squares regression.

Two routes to the same guarantee. `robust_gd_regression` runs projected
gradient descent where every gradient is a robust mean of the per-sample
gradients 2*(w.x - y)*x, rescaled so the bounded-covariance assumption
holds at the current search radius. `sever_loop` alternates an ordinary
(weighted) least-squares solve with a single score-based filter step on
the gradients at the solution: either the step certifies that the
empirical gradient is trustworthy, or it strips weight from gradient-space
outliers and re-solves.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass, field

import numpy as np

from ._seeds import stable_hash64, substream
from .baselines import prune_extremes
from .dataset import Dataset, WeightedSet
from .errors import (
    DataIOError,
    DegenerateDataError,
    FilterPreconditionError,
    InvalidParameterError,
    ParseError,
)
from .filters import (
    RobustMeanConfig,
    apply_removal,
    robust_mean,
    top_eigen,
    universal_filter_scores,
    weighted_covariance,
)

_RIDGE = 1e-8
_MIN_DESIGN_EIG = 0.1


@dataclass(frozen=True)
class RegressionData:
    """Covariate/response pairs with optional ground-truth metadata."""

    covariates: np.ndarray
    responses: np.ndarray
    inlier_mask: np.ndarray | None = None
    true_beta: np.ndarray | None = None
    noise_sigma: float | None = None

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=np.float64)
        y = np.asarray(self.responses, dtype=np.float64).reshape(-1)
        if x.ndim != 2:
            raise InvalidParameterError(f"covariates must be 2-d, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise InvalidParameterError(
                f"{x.shape[0]} covariate rows vs {y.shape[0]} responses"
            )
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidParameterError("covariates/responses contain non-finite entries")
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "responses", y)
        if self.inlier_mask is not None:
            mask = np.asarray(self.inlier_mask, dtype=bool)
            if mask.shape != (x.shape[0],):
                raise InvalidParameterError("inlier_mask length mismatch")
            object.__setattr__(self, "inlier_mask", mask)
        if self.true_beta is not None:
            beta = np.asarray(self.true_beta, dtype=np.float64).reshape(-1)
            if beta.shape != (x.shape[1],):
                raise InvalidParameterError("true_beta dimension mismatch")
            object.__setattr__(self, "true_beta", beta)

    @property
    def count(self) -> int:
        return self.covariates.shape[0]

    @property
    def dim(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class OptConfig:
    """Optimizer knobs.

    radius_R is the search-ball radius; None bootstraps it as 10x the norm
    of the ridge solution on pruned data. step_size None picks 0.25 over
    the top design eigenvalue.
    """

    step_size: float | None = None
    max_iters: int = 150
    grad_tol: float = 1e-8
    radius_R: float | None = None
    eps: float = 0.0
    seed: int = 0
    max_rounds: int = 4

    def __post_init__(self):
        if self.step_size is not None and self.step_size <= 0:
            raise InvalidParameterError("step_size must be positive")
        if self.radius_R is not None and self.radius_R < 1.0:
            raise InvalidParameterError("radius_R must be at least 1")


@dataclass
class RegressionResult:
    w_hat: np.ndarray
    iterations: int
    converged: bool
    grad_norm: float | None = None
    certified: bool | None = None
    trace: list[dict] = field(default_factory=list)


def gradient_samples(data: RegressionData, w: np.ndarray) -> Dataset:
    """Per-sample squared-loss gradients 2*(w.x_i - y_i)*x_i as a dataset."""
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape != (data.dim,):
        raise InvalidParameterError(f"w has shape {w.shape}, expected ({data.dim},)")
    residuals = data.covariates @ w - data.responses
    grads = 2.0 * residuals[:, None] * data.covariates
    grads.setflags(write=False)
    return Dataset(points=grads, inlier_mask=data.inlier_mask)


def gradient_scale(radius: float) -> float:
    """Standard-deviation scale 2*(1 + R) tracking the covariance bound
    O(1 + ||w - beta||^2) over a radius-R search ball."""
    return 2.0 * (1.0 + radius)


def _gradient_filter_params(eps: float) -> tuple[float, float]:
    """(delta, lambda_thresh) for filtering rescaled gradients.

    After division by gradient_scale the clean gradients have top
    covariance eigenvalue about one near the optimum (and at most ~3
    anywhere in the search ball, for fourth-moment-bounded designs), so
    the variance threshold sits a factor above that scale rather than at
    the generic bounded-covariance default, which is too loose to ever
    fire on coordinated gradient-space outliers.
    """
    lam = max(8.0 * eps, 2.0)
    return float(np.sqrt(lam * eps / 8.0)), lam


def robust_gradient(
    data: RegressionData,
    w: np.ndarray,
    eps: float,
    scale_guess: float,
    config: RobustMeanConfig | None = None,
) -> np.ndarray:
    """Robust mean of the per-sample gradients.

    Gradients are divided by scale_guess before filtering so the
    bounded-covariance assumption holds at unit scale, then rescaled back.
    """
    if scale_guess <= 0:
        raise InvalidParameterError("scale_guess must be positive")
    grads = gradient_samples(data, w)
    scaled = Dataset(points=grads.points / scale_guess, inlier_mask=grads.inlier_mask)
    est = robust_mean(scaled, eps, "bounded_covariance", config)
    return est.mean * scale_guess


def _design_check(x: np.ndarray) -> np.ndarray:
    gram = x.T @ x / x.shape[0]
    if np.linalg.eigvalsh(gram).min() < _MIN_DESIGN_EIG:
        raise DegenerateDataError(
            "design second-moment matrix is nearly singular after pruning"
        )
    return gram


def _ridge_solve(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    n, d = x.shape
    if weights is None:
        gram = x.T @ x / n
        rhs = x.T @ y / n
    else:
        gram = (x * weights[:, None]).T @ x
        rhs = (x * weights[:, None]).T @ y
    return np.linalg.solve(gram + _RIDGE * np.eye(d), rhs)


def _project_ball(w: np.ndarray, radius: float) -> np.ndarray:
    norm = float(np.linalg.norm(w))
    if norm <= radius:
        return w
    return w * (radius / norm)


def robust_gd_regression(data: RegressionData, config: OptConfig | None = None) -> RegressionResult:
    """Projected gradient descent with robustly estimated gradients.

    Rounds of PGD run inside a ball of radius R; once the robust gradient
    is small (or the iteration budget is spent) the radius shrinks toward
    the current estimate's norm and the gradient scale is refreshed, so the
    bounded-covariance rescaling tightens as the search localizes.
    """
    cfg = config or OptConfig()
    eps = cfg.eps
    pruned, kept = prune_extremes(Dataset(data.covariates), return_index=True)
    x = pruned.points
    y = data.responses[kept]
    mask = None if data.inlier_mask is None else data.inlier_mask[kept]
    work = RegressionData(covariates=x, responses=y, inlier_mask=mask)
    gram = _design_check(x)
    step = cfg.step_size if cfg.step_size is not None else 0.25 / float(
        np.linalg.eigvalsh(gram).max()
    )

    w = _ridge_solve(x, y)
    radius = cfg.radius_R if cfg.radius_R is not None else max(1.0, 10.0 * float(np.linalg.norm(w)))
    w = _project_ball(w, radius)

    trace: list[dict] = []
    total_iters = 0
    grad_norm = np.inf
    converged = False
    delta_g, lam_g = _gradient_filter_params(eps) if eps > 0 else (None, None)
    for round_idx in range(cfg.max_rounds):
        scale = gradient_scale(radius)
        converged = False
        for it in range(cfg.max_iters):
            mc = RobustMeanConfig(
                delta=delta_g,
                lambda_thresh=lam_g,
                seed=stable_hash64(cfg.seed, "grad", round_idx, it),
            )
            grad = robust_gradient(work, w, eps, scale, mc)
            grad_norm = float(np.linalg.norm(grad))
            total_iters += 1
            if grad_norm <= cfg.grad_tol:
                converged = True
                break
            w_new = _project_ball(w - step * grad, radius)
            if float(np.linalg.norm(w_new - w)) <= 1e-14 * (1.0 + float(np.linalg.norm(w))):
                w = w_new
                break
            w = w_new
        trace.append(
            {"round": round_idx, "radius": radius, "grad_norm": grad_norm, "w_norm": float(np.linalg.norm(w))}
        )
        # shrink the ball toward the current estimate; the gradient scale
        # tightens with it, so outliers hidden at the coarse scale surface
        # on the next round
        new_radius = max(1.0, 1.1 * float(np.linalg.norm(w)))
        if new_radius >= 0.95 * radius:
            break
        radius = new_radius

    return RegressionResult(
        w_hat=w,
        iterations=total_iters,
        converged=converged,
        grad_norm=grad_norm,
        trace=trace,
    )


def sever_loop(data: RegressionData, eps: float, config: OptConfig | None = None) -> RegressionResult:
    """Alternate least squares with one gradient-space filter step.

    Each pass solves weighted ridge least squares, computes the per-sample
    gradients at the solution, and checks the top eigenvalue of their
    (rescaled) weighted covariance. A small eigenvalue certifies the fit;
    otherwise one score-based removal strips gradient-space outliers and
    the loop re-solves. Runs at most n passes.
    """
    cfg = config or OptConfig()
    if not (0.0 <= eps < 1.0 / 3.0):
        raise InvalidParameterError(f"eps must lie in [0, 1/3), got {eps}")
    x, y = data.covariates, data.responses
    n = data.count
    _design_check(x)
    if eps == 0.0:
        w = _ridge_solve(x, y)
        return RegressionResult(w_hat=w, iterations=1, converged=True, certified=True)

    delta, lam_thresh = _gradient_filter_params(eps)
    weights = np.full(n, 1.0 / n)
    eps_state = eps
    trace: list[dict] = []
    w = _ridge_solve(x, y, weights)
    certified = False
    passes = 0
    for passes in range(1, n + 1):
        w = _ridge_solve(x, y, weights)
        radius = max(1.0, float(np.linalg.norm(w)))
        scale = gradient_scale(radius)
        grads = gradient_samples(data, w)
        scaled = Dataset(points=grads.points / scale, inlier_mask=grads.inlier_mask)
        ws = WeightedSet(base=scaled, weights=weights, epsilon=eps_state)
        cov = weighted_covariance(ws)
        nu, _ = top_eigen(cov, method="exact" if data.dim <= 512 else "power",
                          seed=stable_hash64(cfg.seed, "sever-eig", passes))
        removed = 0
        if nu <= 1.0 + lam_thresh:
            certified = True
            trace.append({"pass": passes, "eigenvalue": nu, "removed": 0})
            break
        try:
            scores = universal_filter_scores(ws, eps, delta)
        except FilterPreconditionError:
            certified = True
            trace.append({"pass": passes, "eigenvalue": nu, "removed": 0})
            break
        new_ws = apply_removal(
            ws, scores, scheme="randomized_thresholding",
            seed=stable_hash64(cfg.seed, "sever-step", passes),
        )
        zeroed = ws.support() & ~new_ws.support()
        removed = int(zeroed.sum())
        entry = {"pass": passes, "eigenvalue": nu, "removed": removed}
        if data.inlier_mask is not None:
            entry["removed_inliers"] = int((zeroed & data.inlier_mask).sum())
            entry["removed_outliers"] = int((zeroed & ~data.inlier_mask).sum())
        weights = new_ws.weights.copy()
        eps_state = new_ws.epsilon
        trace.append(entry)

    return RegressionResult(
        w_hat=w,
        iterations=passes,
        converged=certified,
        certified=certified,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Synthetic regression data and its CSV format
# ---------------------------------------------------------------------------


def make_regression(
    n: int,
    d: int,
    beta: np.ndarray | None = None,
    noise_sigma: float = 1.0,
    seed: int = 0,
) -> RegressionData:
    """Gaussian-design linear model y = beta.x + noise, with all-true mask."""
    rng = substream(seed, "regression-clean", n, d)
    if beta is None:
        beta = rng.standard_normal(d)
        beta /= np.linalg.norm(beta)
    beta = np.asarray(beta, dtype=np.float64).reshape(-1)
    x = rng.standard_normal((n, d))
    y = x @ beta + noise_sigma * rng.standard_normal(n)
    return RegressionData(
        covariates=x,
        responses=y,
        inlier_mask=np.ones(n, dtype=bool),
        true_beta=beta,
        noise_sigma=noise_sigma,
    )


def corrupt_regression(
    data: RegressionData,
    eps: float,
    leverage: float = 8.0,
    response_scale: float = 3.0,
    direction: np.ndarray | None = None,
    seed: int = 0,
) -> RegressionData:
    """Plant leverage-point pairs that drag the fit along one direction.

    floor(eps * n) random rows are replaced by x = leverage * a and
    y = -response_scale * leverage, so each planted gradient is
    2 * leverage^2 * (w.a + response_scale) * a: a coordinated pull along
    `a` that is modest in covariate space but dominant in gradient space.
    response_scale keeps the planted residual large even at the corrupted
    least-squares optimum, so the attack cannot mask itself there.
    """
    if not (0.0 <= eps < 0.5):
        raise InvalidParameterError(f"eps must lie in [0, 1/2), got {eps}")
    n, d = data.count, data.dim
    m = int(np.floor(eps * n))
    if m == 0:
        return data
    rng = substream(seed, "regression-corrupt", n)
    a = direction if direction is not None else np.full(d, 1.0 / np.sqrt(d))
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    a /= np.linalg.norm(a)
    idx = rng.choice(n, size=m, replace=False)
    x = data.covariates.copy()
    y = data.responses.copy()
    mask = np.ones(n, dtype=bool) if data.inlier_mask is None else data.inlier_mask.copy()
    x[idx] = leverage * a
    y[idx] = -response_scale * leverage
    mask[idx] = False
    return RegressionData(
        covariates=x,
        responses=y,
        inlier_mask=mask,
        true_beta=data.true_beta,
        noise_sigma=data.noise_sigma,
    )


def save_regression(data: RegressionData, path: str) -> None:
    """CSV with columns x0..x{d-1},y[,inlier]; %.17g full precision."""
    cols = [f"x{i}" for i in range(data.dim)] + ["y"]
    block = np.column_stack([data.covariates, data.responses])
    if data.inlier_mask is not None:
        cols.append("inlier")
        block = np.column_stack([block, data.inlier_mask.astype(np.float64)])
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for row in block:
                fh.write(",".join("%.17g" % v for v in row) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc


def load_regression(path: str) -> RegressionData:
    """Load a regression CSV written by `save_regression`."""
    try:
        with open(path) as fh:
            rows = list(_csv.reader(fh))
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError("file is empty", line=1)
    header = [c.strip() for c in rows[0]]
    if "y" not in header:
        raise ParseError("header must contain a 'y' column", line=1)
    has_mask = header[-1] == "inlier"
    y_col = header.index("y")
    d = y_col
    data_rows = rows[1:]
    if not data_rows:
        raise ParseError("no data rows", line=2)
    parsed = np.empty((len(data_rows), len(header)))
    for i, row in enumerate(data_rows):
        if len(row) != len(header):
            raise ParseError(f"row has {len(row)} cells, expected {len(header)}", line=i + 2)
        try:
            parsed[i] = [float(c) for c in row]
        except ValueError:
            raise ParseError("non-numeric cell", line=i + 2) from None
    mask = parsed[:, -1].astype(bool) if has_mask else None
    return RegressionData(
        covariates=parsed[:, :d],
        responses=parsed[:, y_col],
        inlier_mask=mask,
    )
