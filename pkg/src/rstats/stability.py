"""Subset-stability diagnostics and spectral mean-error certificates.

A point set S is (eps, delta)-stable about a reference mean when every
subset holding at least a (1 - eps)-fraction of S keeps its projected
sample mean within delta of the reference and its projected second moment
about the reference within delta^2/eps of one, along every direction.
Stability is what makes the covariance eigenvalue a *certificate*: if the
corrupted set's top eigenvalue reads 1 + lambda, the weighted mean is
provably within delta + sqrt(2*eps*lambda + 4*delta^2) of the true mean.

`directional_stability` evaluates both subset extremes exactly for one
direction; `estimate_stability` probes many directions and aggregates a
lower-bound estimate delta_hat. A sampled probe can only certify the
directions it saw, so delta_hat is a lower bound on the true delta, not
a certificate over all of R^d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeds import substream
from .dataset import Dataset
from .errors import DegenerateDataError, InvalidParameterError

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class StabilityParams:
    """An (epsilon, delta) stability level; requires 0 < eps < 1/2, delta >= eps."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 0.5):
            raise InvalidParameterError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.delta < self.epsilon:
            raise InvalidParameterError(
                f"delta must be >= epsilon, got delta={self.delta}, eps={self.epsilon}"
            )


@dataclass(frozen=True)
class StabilityReport:
    """Aggregate of directional probes.

    worst_mean_dev and worst_var_dev are the largest condition-1 and raw
    condition-2 deviations seen; delta_hat = max(worst_mean_dev,
    sqrt(eps * worst_var_dev)) converts them to a single stability level.
    """

    epsilon: float
    directions_tested: int
    worst_mean_dev: float
    worst_var_dev: float
    delta_hat: float
    witness_direction: np.ndarray

    def __post_init__(self):
        if self.worst_mean_dev < 0 or self.worst_var_dev < 0 or self.delta_hat < 0:
            raise InvalidParameterError("deviations must be nonnegative")
        v = np.asarray(self.witness_direction, dtype=np.float64)
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise InvalidParameterError("witness_direction must be a unit vector")


@dataclass(frozen=True)
class CertificateBound:
    """Computed mean-error guarantee delta + sqrt(2*eps*lambda + 4*delta^2)."""

    delta: float
    epsilon: float
    lam: float
    bound: float


def _check_direction(v: np.ndarray, d: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (d,):
        raise InvalidParameterError(f"direction has shape {v.shape}, expected ({d},)")
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise InvalidParameterError("direction must have unit norm")
    return v


def _extreme_averages(values: np.ndarray, m: int) -> tuple[float, float]:
    """(max, min) of the average of `values` over subsets missing <= m points.

    For subsets of size n - k the achievable averages form the interval
    [drop k largest, drop k smallest]; scanning k = 0..m covers every
    admissible subset because any subset average lies inside its size's
    interval and the endpoints are attained by one-sided deletion.
    """
    n = values.shape[0]
    srt = np.sort(values)
    prefix = np.concatenate([[0.0], np.cumsum(srt)])
    total = prefix[-1]
    ks = np.arange(m + 1)
    sizes = n - ks
    # dropping the k smallest keeps the suffix; dropping the k largest keeps the prefix
    hi = (total - prefix[ks]) / sizes
    lo = prefix[sizes] / sizes
    return float(hi.max()), float(lo.min())


def directional_stability(
    S: Dataset, mu_x: np.ndarray, eps: float, v: np.ndarray
) -> tuple[float, float]:
    """Exact worst-case subset deviations along one direction.

    Returns:
        mean_dev: max over subsets S' with |S'| >= (1 - eps)|S| of
            |avg_{S'} v.(x - mu_x)|.
        var_dev: max over the same subsets of |avg_{S'} (v.(x - mu_x))^2 - 1|.

    Runs in O(n log n): sort the projections once; each one-sided deletion
    extreme is a prefix-sum lookup, and all deletion counts k <= floor(eps n)
    are scanned because the extremum need not use the full budget.
    """
    n = S.count
    if n < 1:
        raise DegenerateDataError("empty point set")
    v = _check_direction(v, S.dim)
    mu_x = np.asarray(mu_x, dtype=np.float64).reshape(-1)
    if mu_x.shape != (S.dim,):
        raise InvalidParameterError(f"mu_x has shape {mu_x.shape}, expected ({S.dim},)")
    if not (0.0 <= eps < 1.0):
        raise InvalidParameterError(f"eps must lie in [0, 1), got {eps}")
    m = int(np.floor(eps * n))
    if m >= n:
        raise DegenerateDataError("deletion budget covers the whole set")

    proj = (S.points - mu_x) @ v
    hi, lo = _extreme_averages(proj, m)
    mean_dev = max(abs(hi), abs(lo))

    sq = proj * proj
    hi2, lo2 = _extreme_averages(sq, m)
    var_dev = max(abs(hi2 - 1.0), abs(lo2 - 1.0))
    return mean_dev, var_dev


def estimate_stability(
    S: Dataset,
    mu_x: np.ndarray,
    eps: float,
    num_random_dirs: int = 64,
    seed: int = 0,
) -> StabilityReport:
    """Probe stability along sampled directions plus the natural suspects.

    Directions tested: `num_random_dirs` uniform random unit vectors, the
    top eigenvector of the second-moment matrix about mu_x, and all d
    coordinate axes. The returned delta_hat is a lower bound on the true
    stability delta (a full supremum over directions is not attempted).
    """
    if num_random_dirs < 1:
        raise InvalidParameterError("num_random_dirs must be >= 1")
    d = S.dim
    rng = substream(seed, "stability-dirs", num_random_dirs)
    dirs = rng.standard_normal((num_random_dirs, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)

    mu_x = np.asarray(mu_x, dtype=np.float64).reshape(-1)
    centered = S.points - mu_x
    second = centered.T @ centered / S.count
    eigvec = np.linalg.eigh(second)[1][:, -1]
    eigvec = eigvec / np.linalg.norm(eigvec)

    axes = np.eye(d)
    candidates = np.vstack([dirs, eigvec[None, :], axes])

    worst_mean = -1.0
    worst_var = -1.0
    best_score = -1.0
    witness = candidates[0]
    for v in candidates:
        mean_dev, var_dev = directional_stability(S, mu_x, eps, v)
        worst_mean = max(worst_mean, mean_dev)
        worst_var = max(worst_var, var_dev)
        score = max(mean_dev, np.sqrt(eps * var_dev))
        if score > best_score:
            best_score = score
            witness = v
    delta_hat = max(worst_mean, float(np.sqrt(eps * worst_var)))
    return StabilityReport(
        epsilon=float(eps),
        directions_tested=candidates.shape[0],
        worst_mean_dev=worst_mean,
        worst_var_dev=worst_var,
        delta_hat=delta_hat,
        witness_direction=witness,
    )


def certificate_bound(params: StabilityParams, lam: float) -> CertificateBound:
    """Mean-error certificate from a top-eigenvalue reading of 1 + lam.

    The explicit-constant chain: a (eps, delta)-stable core forces
    1 + lam >= 1 - delta^2/eps * (1 - eps) + (eps/2) * ||mu_core - mu_rest||^2,
    so ||mu_core - mu_rest|| <= sqrt((2/eps)(lam + delta^2/eps + delta^2))
    and the weighted mean lands within
    delta + sqrt(2*eps*lam + 4*delta^2) of the true mean (using eps <= 1/2).
    """
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    delta, eps = params.delta, params.epsilon
    bound = delta + float(np.sqrt(2.0 * eps * lam + 4.0 * delta * delta))
    return CertificateBound(delta=delta, epsilon=eps, lam=float(lam), bound=bound)
