"""Spectral outlier filters and the robust mean driver.

The core loop: compute the weighted covariance of the current point set,
read off its top eigenpair, and either certify (eigenvalue small, so the
weighted mean is provably close to the true mean) or score points by their
squared projection on the top eigenvector and strip weight from the
highest scorers. Scoring guarantees that at least twice as much score mass
sits on adversarial points as on clean ones, so removal proportional to
score loses outlier mass faster than inlier mass in expectation.

Three removal schemes are provided (randomized thresholding, independent
removal, deterministic reweighting); all zero out the argmax score, so the
loop terminates in at most n iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._seeds import stable_hash64, substream
from .baselines import prune_extremes, sample_mean
from .dataset import Dataset, WeightedSet, uniform_weights
from .errors import (
    ConvergenceError,
    DegenerateDataError,
    FilterPreconditionError,
    InvalidParameterError,
    NoThresholdError,
)
from .stability import CertificateBound, StabilityParams, certificate_bound

SCHEMES = ("randomized_thresholding", "independent_removal", "deterministic_reweighting")
ASSUMPTIONS = ("subgaussian_identity", "bounded_covariance")

_EXACT_EIG_MAX_DIM = 512
_COV_BLOCK = 16384


def _signed(val: float, vec: np.ndarray) -> tuple[float, np.ndarray]:
    """Flip the eigenvector so its first nonzero coordinate is positive."""
    nz = np.nonzero(np.abs(vec) > 1e-12 * max(1.0, np.abs(vec).max()))[0]
    if nz.size and vec[nz[0]] < 0:
        vec = -vec
    return float(val), vec


def weighted_covariance(W: WeightedSet) -> np.ndarray:
    """Covariance sum_i w_i (x_i - mu_W)(x_i - mu_W)^T of a weighted set.

    Accumulated over row blocks with reused buffers so no (n, d) temporary
    is materialized.
    """
    mu = sample_mean(W)
    pts = W.base.points
    w = W.weights
    n, d = pts.shape
    cov = np.zeros((d, d))
    block = min(n, _COV_BLOCK)
    centered = np.empty((block, d))
    scaled = np.empty((block, d))
    for start in range(0, n, block):
        stop = min(start + block, n)
        c = np.subtract(pts[start:stop], mu, out=centered[: stop - start])
        s = np.multiply(c, w[start:stop, None], out=scaled[: stop - start])
        cov += s.T @ c
    return (cov + cov.T) / 2.0


def top_eigen(
    M: np.ndarray,
    method: str = "exact",
    tol: float = 1e-10,
    max_iter: int = 5000,
    seed: int = 0,
) -> tuple[float, np.ndarray]:
    """Top eigenpair of a symmetric matrix.

    method "exact" uses a full symmetric eigendecomposition; "power" runs
    seeded power iteration with a Rayleigh-quotient residual stop
    ||Mv - lambda v|| <= tol * |lambda|, falling back to the exact path on
    non-convergence when d <= 512 (raising ConvergenceError beyond that).
    The power method targets PSD matrices, where the dominant eigenvalue
    in magnitude is also the largest.

    Eigenvector sign is normalized so the first nonzero coordinate is
    positive, making degenerate-spectrum results reproducible.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidParameterError(f"matrix must be square, got shape {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if np.abs(M - M.T).max() > 1e-8 * scale:
        raise InvalidParameterError("matrix is not symmetric")
    d = M.shape[0]

    if method == "exact":
        vals, vecs = np.linalg.eigh(M)
        return _signed(vals[-1], vecs[:, -1])
    if method != "power":
        raise InvalidParameterError(f"unknown eigensolver {method!r}")

    rng = substream(seed, "power-start", d)
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam = float(v @ w)
        if np.linalg.norm(w - lam * v) <= tol * max(abs(lam), 1e-300):
            return _signed(lam, v)
        norm = np.linalg.norm(w)
        if norm == 0.0:  # v is in the kernel; M may be zero
            return _signed(0.0, v)
        v = w / norm
    if d <= _EXACT_EIG_MAX_DIM:
        vals, vecs = np.linalg.eigh(M)
        return _signed(vals[-1], vecs[:, -1])
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps")


def _lanczos_top(operator, d: int, seed: int) -> tuple[float, np.ndarray] | None:
    """Top eigenpair via Lanczos (seeded start); None on non-convergence.

    Plain power iteration crawls when the top of the spectrum is clustered,
    which is the normal situation for flattened second-moment covariances;
    Lanczos resolves a vector of the top cluster in a few hundred matvecs.
    """
    from scipy.sparse.linalg import eigsh  # deferred: scipy is heavy to load

    rng = substream(seed, "lanczos-start", d)
    v0 = rng.standard_normal(d)
    try:
        vals, vecs = eigsh(operator, k=1, which="LA", v0=v0, tol=1e-9, maxiter=100 * d)
    except Exception:
        return None
    return _signed(vals[0], vecs[:, 0])


def _auto_eig(cov: np.ndarray, method: str | None, seed: int) -> tuple[float, np.ndarray]:
    if method is None:
        if cov.shape[0] <= _EXACT_EIG_MAX_DIM:
            method = "exact"
        else:
            pair = _lanczos_top(cov, cov.shape[0], seed)
            if pair is not None:
                return pair
            vals, vecs = np.linalg.eigh(cov)
            return _signed(vals[-1], vecs[:, -1])
    return top_eigen(cov, method=method, seed=seed)


def _spectral_read(W: WeightedSet, method: str | None, seed: int):
    """(top eigenvalue, top eigenvector, mean) of a weighted set's covariance.

    Below the exact-eigendecomposition cutoff the covariance is formed
    explicitly. Above it, forming the d x d matrix from n points costs
    O(n d^2) memory traffic and flops per entry column and dominates
    everything else, so the eigenpair is extracted from the implicit
    operator v -> sum_i w_i (x_i - mu)((x_i - mu).v), whose matvec is O(n d).
    """
    mu = sample_mean(W)
    d = W.base.dim
    if method is not None or d <= _EXACT_EIG_MAX_DIM:
        cov = weighted_covariance(W)
        nu, v = _auto_eig(cov, method, seed)
        return nu, v, mu

    from scipy.sparse.linalg import LinearOperator

    pts, w = W.base.points, W.weights

    def matvec(vec):
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        proj = pts @ vec - float(mu @ vec)
        wp = w * proj
        return pts.T @ wp - mu * float(wp.sum())

    op = LinearOperator((d, d), matvec=matvec, dtype=np.float64)
    pair = _lanczos_top(op, d, seed)
    if pair is None:  # last resort: form the matrix and decompose exactly
        cov = weighted_covariance(W)
        vals, vecs = np.linalg.eigh(cov)
        pair = _signed(vals[-1], vecs[:, -1])
    nu, v = pair
    return nu, v, mu


# ---------------------------------------------------------------------------
# Basic (tail-bound) filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BasicFilterResult:
    """Outcome of one deterministic filter step.

    Either `certified` is True and `mean` holds the certified estimate, or
    `removed` holds the indices whose projections exceeded the admissible
    sub-gaussian tail envelope.
    """

    certified: bool
    mean: np.ndarray | None = None
    removed: np.ndarray | None = None
    eigenvalue: float = 0.0
    direction: np.ndarray | None = None
    threshold: float | None = None


def basic_filter_step(
    T: Dataset, eps: float, delta: float, c_const: float = 3.0
) -> BasicFilterResult:
    """One step of the deterministic tail-bound filter.

    Certifies when the top directional variance is at most 1 + 2*delta^2/eps.
    Otherwise it searches thresholds of the form 2*t + 2 + c*sqrt(lam*eps)
    over the data-induced candidates and removes every point whose projected
    distance exceeds the smallest threshold at which the empirical tail mass
    beats 4*exp(-t^2/2). Candidates induced by the sample are exhaustive
    because the empirical tail is a step function.

    The constants come from a proof and are deliberately loose; moderate
    outliers (inside roughly seven sigma) are invisible to this filter and
    surface as NoThresholdError, at which point callers should move to the
    score-based filter.
    """
    if not (0.0 < eps < 0.5):
        raise InvalidParameterError(f"eps must lie in (0, 1/2), got {eps}")
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    n = T.count
    W = uniform_weights(T, 0.0)
    nu, v, _ = _spectral_read(W, None, seed=stable_hash64("basic-filter", n))
    lam = nu - 1.0
    mu = T.points.mean(axis=0)
    if nu <= 1.0 + 2.0 * delta * delta / eps:
        return BasicFilterResult(certified=True, mean=mu, eigenvalue=nu, direction=v)

    offset = 2.0 + c_const * np.sqrt(max(lam, 0.0) * eps)
    proj = np.abs((T.points - mu) @ v)
    sorted_proj = np.sort(proj)
    # Each sorted projection value s induces the candidate t = (s - offset)/2,
    # approached from below so the tail {|p| >= s} counts inclusively; the
    # empirical tail is a step function, so these candidates are exhaustive.
    t_candidates = (sorted_proj - offset) / 2.0
    first_of_tie = np.searchsorted(sorted_proj, sorted_proj, side="left")
    tail_counts = n - first_of_tie
    valid = (t_candidates > 0.0) & (
        tail_counts / n > 4.0 * np.exp(-(t_candidates**2) / 2.0)
    )
    if not valid.any():
        raise NoThresholdError(
            "no threshold exceeded the sub-gaussian tail envelope; "
            "use the score-based filter instead"
        )
    first = int(np.argmax(valid))
    threshold = float(sorted_proj[first])
    removed = np.nonzero(proj >= threshold)[0]
    return BasicFilterResult(
        certified=False,
        removed=removed,
        eigenvalue=nu,
        direction=v,
        threshold=float(threshold),
    )


# ---------------------------------------------------------------------------
# Universal (score-based) filter
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreFunction:
    """Nonnegative per-point scores, supported on the top-scoring slice.

    scores[i] = (v.(x_i - mu_W))^2 for the ceil(eps * n_active) active
    points where that value is largest (ties broken by ascending index),
    zero elsewhere. At least one score is strictly positive.
    """

    scores: np.ndarray
    builder: str
    witness_direction: np.ndarray
    top_eigenvalue: float
    center: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.min() < 0:
            raise InvalidParameterError("scores must be nonnegative")
        if not (s > 0).any():
            raise InvalidParameterError("score function must be non-zero")


def _as_weighted(data, eps: float) -> WeightedSet:
    if isinstance(data, WeightedSet):
        return data
    return uniform_weights(data, eps)


def universal_filter_scores(data, eps: float, delta: float) -> ScoreFunction:
    """Score points by squared projection on the top covariance eigenvector.

    Requires the top eigenvalue of the weighted covariance to exceed
    1 + 8*delta^2/eps; below that the certified regime applies and no
    useful score function exists (FilterPreconditionError).
    """
    if not (0.0 < eps < 0.5):
        raise InvalidParameterError(f"eps must lie in (0, 1/2), got {eps}")
    W = _as_weighted(data, eps)
    nu, v, mu = _spectral_read(W, None, seed=stable_hash64("universal", W.base.count))
    if nu <= 1.0 + 8.0 * delta * delta / eps:
        raise FilterPreconditionError(
            f"top eigenvalue {nu:.6g} does not exceed 1 + 8*delta^2/eps = "
            f"{1.0 + 8.0 * delta * delta / eps:.6g}"
        )
    proj = W.base.points @ v - float(mu @ v)
    g_all = proj * proj
    active = np.nonzero(W.support())[0]
    g = g_all[active]
    k = int(np.ceil(eps * active.size))
    k = max(1, min(k, active.size))
    order = np.lexsort((active, -g))  # by descending score, then ascending index
    chosen = active[order[:k]]
    scores = np.zeros(W.base.count)
    scores[chosen] = g_all[chosen]
    if not (scores > 0).any():
        raise FilterPreconditionError("all candidate scores are zero")
    return ScoreFunction(
        scores=scores,
        builder="universal",
        witness_direction=v,
        top_eigenvalue=nu,
        center=mu,
    )


def _epsilon_for_weights(weights: np.ndarray, base_eps: float) -> float:
    """Smallest cap parameter admitting the given normalized weights."""
    n = weights.shape[0]
    wmax = float(weights.max())
    needed = 1.0 - 1.0 / (n * wmax) if wmax > 0 else 0.0
    eps = max(base_eps, needed + 1e-12)
    return min(eps, 1.0 - 1e-12)


def apply_removal(
    W: WeightedSet, f: ScoreFunction, scheme: str = "randomized_thresholding", seed: int = 0
) -> WeightedSet:
    """Strip weight according to a score function and renormalize.

    Schemes:
      randomized_thresholding: draw y uniform on (0, max f] and zero every
          point with f(x) >= y.
      independent_removal: zero each point independently with probability
          f(x) / max f.
      deterministic_reweighting: scale each weight by 1 - f(x) / max f.

    All schemes renormalize to total mass one, and all send the argmax
    score's weight to zero, so repeated application makes progress.
    """
    if scheme not in SCHEMES:
        raise InvalidParameterError(f"unknown scheme {scheme!r}")
    n = W.base.count
    s = np.asarray(f.scores, dtype=np.float64)
    if s.shape != (n,):
        raise InvalidParameterError(f"scores have shape {s.shape}, expected ({n},)")
    support = W.support()
    s = np.where(support, s, 0.0)
    maxf = float(s.max())
    if maxf <= 0.0:
        raise DegenerateDataError("score function is zero on the support")

    rng = substream(seed, "removal", scheme)
    if scheme == "randomized_thresholding":
        y = maxf * (1.0 - rng.random())  # y in (0, maxf]; argmax always removed
        new = np.where(s >= y, 0.0, W.weights)
    elif scheme == "independent_removal":
        u = rng.random(n)
        new = np.where(u < s / maxf, 0.0, W.weights)
    else:
        new = W.weights * (1.0 - s / maxf)

    total = float(new.sum())
    if total <= 1e-300:
        raise DegenerateDataError("removal exhausted the support")
    new = new / total
    return WeightedSet(base=W.base, weights=new, epsilon=_epsilon_for_weights(new, W.epsilon))


# ---------------------------------------------------------------------------
# Randomized filtering loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RemovalRecord:
    """Per-iteration removal accounting (counts of newly zeroed points)."""

    iteration: int
    eigenvalue: float
    removed_count: int
    removed_mass: float
    removed_inliers: int | None = None
    removed_outliers: int | None = None


@dataclass
class FilterState:
    """Terminal state of a filtering run plus its removal history."""

    active: WeightedSet
    mu: np.ndarray
    top_eigenvalue: float
    top_eigenvector: np.ndarray
    iteration: int
    removed_history: list[RemovalRecord] = field(default_factory=list)


def randomized_filter(
    T: Dataset,
    eps: float,
    delta: float,
    lambda_thresh: float | None = None,
    scheme: str = "randomized_thresholding",
    seed: int = 0,
    eig_method: str | None = None,
) -> tuple[np.ndarray, FilterState]:
    """Iterate score-and-remove until the top eigenvalue certifies.

    Loop: read the weighted covariance's top eigenpair; stop and return the
    weighted mean once the eigenvalue is at most 1 + lambda_thresh;
    otherwise build scores and strip weight. lambda_thresh defaults to
    8*delta^2/eps and may not be set below it, so the score precondition
    holds whenever the loop continues.
    """
    if not (0.0 <= eps < 0.5):
        raise InvalidParameterError(f"eps must lie in [0, 1/2), got {eps}")
    if eps > 0.0:
        floor = 8.0 * delta * delta / eps
        if lambda_thresh is None:
            lambda_thresh = floor
        elif lambda_thresh < floor * (1.0 - 1e-12):
            raise InvalidParameterError(
                f"lambda_thresh={lambda_thresh:.6g} below the score precondition "
                f"8*delta^2/eps = {floor:.6g}"
            )
    elif lambda_thresh is None:
        lambda_thresh = np.inf

    W = uniform_weights(T, eps)
    mask = T.inlier_mask
    history: list[RemovalRecord] = []
    n = T.count

    for it in range(n + 8):
        nu, v, mu = _spectral_read(W, eig_method, seed=stable_hash64(seed, "eig", it))
        if nu <= 1.0 + lambda_thresh:
            state = FilterState(
                active=W,
                mu=mu,
                top_eigenvalue=nu,
                top_eigenvector=v,
                iteration=it,
                removed_history=history,
            )
            return mu, state

        scores = universal_filter_scores(W, eps, delta)
        prev = W
        for retry in range(64):
            W = apply_removal(
                prev, scores, scheme=scheme, seed=stable_hash64(seed, "step", it, retry)
            )
            if not np.array_equal(W.weights, prev.weights):
                break
        else:
            raise ConvergenceError("removal made no progress after 64 retries")
        if int(W.support().sum()) < n // 2:
            raise DegenerateDataError(
                "filter stripped more than half the points without certifying; "
                "the variance threshold is not attainable at this sample size"
            )

        newly_zeroed = prev.support() & ~W.support()
        if scheme == "deterministic_reweighting":
            s = np.where(prev.support(), scores.scores, 0.0)
            removed_mass = float((prev.weights * s / s.max()).sum())
        else:
            removed_mass = float(prev.weights[newly_zeroed].sum())
        rec = RemovalRecord(
            iteration=it,
            eigenvalue=nu,
            removed_count=int(newly_zeroed.sum()),
            removed_mass=removed_mass,
            removed_inliers=None if mask is None else int((newly_zeroed & mask).sum()),
            removed_outliers=None if mask is None else int((newly_zeroed & ~mask).sum()),
        )
        history.append(rec)

    raise ConvergenceError("filter failed to terminate within its iteration budget")


# ---------------------------------------------------------------------------
# Separation oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearFunctional:
    """L(Y) = E_Y[(v.(Y - center))^2], linear in the distribution Y."""

    direction: np.ndarray
    center: np.ndarray
    value_at_input: float

    def evaluate(self, points: np.ndarray, weights: np.ndarray | None = None) -> float:
        pts = points.points if isinstance(points, Dataset) else np.asarray(points)
        proj = (pts - self.center) @ self.direction
        if weights is None:
            return float(np.mean(proj**2))
        return float(np.sum(weights * proj**2))


def separation_oracle(W: WeightedSet, var_bound: float) -> LinearFunctional | None:
    """Linear functional separating W from low-variance distributions.

    If some direction v has directional variance 1 + lambda > var_bound,
    returns L(Y) = E_Y[(v.(Y - mu_W))^2] packaged with its value at W;
    any distribution whose variance plus squared mean-offset along v stays
    below that value is strictly separated. Returns None when every
    direction is within the bound.
    """
    nu, v, mu = _spectral_read(W, None, seed=stable_hash64("oracle", W.base.count))
    if nu > var_bound:
        return LinearFunctional(direction=v, center=mu, value_at_input=nu)
    return None


# ---------------------------------------------------------------------------
# Robust mean driver
# ---------------------------------------------------------------------------


def default_delta(assumption: str, eps: float) -> float:
    """Stability level targeted for each distributional assumption.

    The asymptotic rates are eps*sqrt(log(1/eps)) for identity-covariance
    sub-gaussian data and sqrt(eps) for bounded covariance; both are
    multiplied by 2 as a concrete stand-in for the hidden constants.
    """
    if assumption not in ASSUMPTIONS:
        raise InvalidParameterError(f"unknown assumption {assumption!r}")
    if eps == 0.0:
        return 0.0
    if assumption == "subgaussian_identity":
        return 2.0 * eps * float(np.sqrt(np.log(1.0 / eps)))
    return 2.0 * float(np.sqrt(eps))


@dataclass(frozen=True)
class RobustMeanConfig:
    """Knobs for the robust mean pipeline; None fields use defaults."""

    delta: float | None = None
    lambda_thresh: float | None = None
    scheme: str = "randomized_thresholding"
    seed: int = 0
    radius_mult: float = 4.0
    eig_method: str | None = None


@dataclass
class RobustMeanResult:
    mean: np.ndarray
    certificate: CertificateBound
    assumption: str
    delta: float
    lambda_thresh: float
    pruned_count: int
    trace: FilterState | None


def robust_mean(
    T: Dataset,
    eps: float,
    assumption: str = "subgaussian_identity",
    config: RobustMeanConfig | None = None,
) -> RobustMeanResult:
    """Prune, filter, and certify a mean estimate.

    Pipeline: drop egregious points (pruning), pick the stability target
    delta for the assumption, run the randomized filter with threshold
    8*delta^2/eps, and report the weighted mean together with the
    eigenvalue certificate evaluated at the terminal reading.

    Requires eps < 1/3 (beyond that the capped-weight family is no longer
    close to the clean uniform distribution and the certificate breaks).
    At eps = 0 no filtering happens and the certificate degenerates to a
    zero bound, matching the clean limit of the formula.
    """
    if not (0.0 <= eps < 1.0 / 3.0):
        raise InvalidParameterError(f"eps must lie in [0, 1/3), got {eps}")
    cfg = config or RobustMeanConfig()
    pruned = prune_extremes(T, radius_mult=cfg.radius_mult)
    pruned_count = T.count - pruned.count

    if eps == 0.0:
        W = uniform_weights(pruned, 0.0)
        nu, v, mu = _spectral_read(W, cfg.eig_method, seed=stable_hash64(cfg.seed, "eig", 0))
        lam = max(0.0, nu - 1.0)
        cert = CertificateBound(delta=0.0, epsilon=0.0, lam=lam, bound=0.0)
        state = FilterState(
            active=W, mu=mu, top_eigenvalue=nu, top_eigenvector=v, iteration=0
        )
        return RobustMeanResult(
            mean=mu,
            certificate=cert,
            assumption=assumption,
            delta=0.0,
            lambda_thresh=np.inf,
            pruned_count=pruned_count,
            trace=state,
        )

    delta = cfg.delta if cfg.delta is not None else default_delta(assumption, eps)
    lambda_thresh = (
        cfg.lambda_thresh if cfg.lambda_thresh is not None else 8.0 * delta * delta / eps
    )
    mu, state = randomized_filter(
        pruned,
        eps,
        delta,
        lambda_thresh=lambda_thresh,
        scheme=cfg.scheme,
        seed=cfg.seed,
        eig_method=cfg.eig_method,
    )
    lam = max(0.0, state.top_eigenvalue - 1.0)
    cert = certificate_bound(StabilityParams(epsilon=eps, delta=delta), lam)
    return RobustMeanResult(
        mean=mu,
        certificate=cert,
        assumption=assumption,
        delta=delta,
        lambda_thresh=lambda_thresh,
        pruned_count=pruned_count,
        trace=state,
    )
