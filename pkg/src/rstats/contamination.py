"""Synthetic clean-data generators and contamination adversaries.

Two corruption models are provided. The *strong* adversary inspects the
sample, removes floor(eps * n) points of its choosing, and replaces them
with arbitrary points. The *additive* (Huber-style) adversary is oblivious:
it appends floor(eps * n) fresh outliers and the set is subsampled back to
its original size.

Attack placements are stated only up to constants in the literature, so the
concrete geometry here is a documented choice:

  extreme                   outliers at mu + 10 * magnitude * sqrt(d) * v
  mean_shift_conspiracy     outliers at mu + magnitude * sqrt(d) * v
  random_direction          each outlier at mu + magnitude * sqrt(d) * u_i,
                            u_i a fresh random unit vector
  variance_preserving_shift outliers at mu + (magnitude / sqrt(eps)) * v,
                            inflating the variance along v by about
                            magnitude^2 while staying inside the bulk
  tail_deletion             deletes the floor(eps * n) points with largest
                            v.x and stuffs in copies of the remaining mean
                            (strong model only: additive adversaries cannot
                            delete)

`magnitude` is in units of sqrt(d) times the clean standard deviation for
the first three attacks and in units of sqrt(eps) displacement for the
variance-preserving one.

Which points the strong adversary replaces: for mean_shift_conspiracy it
replaces the floor(eps * n) points with *smallest* v.x, so the deletion
reinforces the displacement instead of partially cancelling it; extreme
and variance_preserving_shift replace the largest-v.x points; the
random-direction attack replaces a seeded random subset (it has no
distinguished direction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._seeds import substream
from .dataset import Dataset
from .errors import InvalidParameterError

CLEAN_FAMILIES = ("gaussian_identity", "gaussian_cov", "bounded_cov_heavy_tail")
MODELS = ("huber_additive", "strong")
ATTACKS = (
    "extreme",
    "mean_shift_conspiracy",
    "random_direction",
    "variance_preserving_shift",
    "tail_deletion",
)


@dataclass(frozen=True)
class CleanSpec:
    """Recipe for an uncontaminated sample.

    family "gaussian_identity" draws N(mean, I); "gaussian_cov" draws
    N(mean, cov); "bounded_cov_heavy_tail" draws a multivariate Student-t
    with `dof` degrees of freedom, rescaled so its covariance equals `cov`
    (identity by default).
    """

    family: str
    n: int
    d: int
    mean: np.ndarray | float = 0.0
    cov: np.ndarray | None = None
    dof: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.family not in CLEAN_FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        if self.n < 1 or self.d < 1:
            raise InvalidParameterError("need n >= 1 and d >= 1")
        if self.family == "bounded_cov_heavy_tail" and self.dof < 3:
            raise InvalidParameterError("heavy-tail family needs dof >= 3")

    def mean_vector(self) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=np.float64)
        if mean.ndim == 0:
            return np.full(self.d, float(mean))
        if mean.shape != (self.d,):
            raise InvalidParameterError(f"mean has shape {mean.shape}, expected ({self.d},)")
        return mean

    def cov_matrix(self) -> np.ndarray:
        if self.cov is None:
            return np.eye(self.d)
        cov = np.asarray(self.cov, dtype=np.float64)
        if cov.shape != (self.d, self.d):
            raise InvalidParameterError(
                f"cov has shape {cov.shape}, expected ({self.d}, {self.d})"
            )
        if np.abs(cov - cov.T).max() > 1e-12 * max(1.0, np.abs(cov).max()):
            raise InvalidParameterError("cov must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-10:
            raise InvalidParameterError("cov must be positive semidefinite")
        return cov


@dataclass(frozen=True)
class ContaminationSpec:
    """Adversary model, attack shape, and contamination fraction."""

    model: str
    epsilon: float
    attack: str
    direction: np.ndarray | None = None
    magnitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidParameterError(f"unknown model {self.model!r}")
        if self.attack not in ATTACKS:
            raise InvalidParameterError(f"unknown attack {self.attack!r}")
        if not (0.0 <= float(self.epsilon) < 0.5):
            raise InvalidParameterError(f"epsilon must lie in [0, 1/2), got {self.epsilon}")
        if self.attack == "tail_deletion" and self.model != "strong":
            raise InvalidParameterError(
                "tail_deletion requires the strong model: an additive adversary "
                "can only add points, never remove them"
            )
        if self.direction is not None:
            v = np.asarray(self.direction, dtype=np.float64).reshape(-1)
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise InvalidParameterError("direction must be a unit vector")
            v = v.copy()
            v.setflags(write=False)
            object.__setattr__(self, "direction", v)


def default_direction(d: int) -> np.ndarray:
    """The diagonal unit vector (1, ..., 1) / sqrt(d).

    Chosen as the default attack direction because it spreads the
    displacement across every coordinate, which is the placement that
    defeats coordinate-wise estimators.
    """
    return np.full(d, 1.0 / np.sqrt(d))


def generate_clean(spec: CleanSpec) -> Dataset:
    """Draw a clean sample with an all-true mask and evaluation metadata."""
    rng = substream(spec.seed, "clean", spec.family, spec.n, spec.d)
    mean = spec.mean_vector()
    cov = spec.cov_matrix()
    n, d = spec.n, spec.d

    if spec.family == "gaussian_identity":
        pts = rng.standard_normal((n, d)) + mean
    elif spec.family == "gaussian_cov":
        z = rng.standard_normal((n, d))
        lower = np.linalg.cholesky(cov + 1e-12 * np.eye(d))
        pts = z @ lower.T + mean
    else:
        # Student-t scaled so the sample covariance targets `cov` exactly:
        # with base covariance cov*(dof-2)/dof, E[dof/u] = dof/(dof-2)
        # restores the requested matrix.
        dof = spec.dof
        z = rng.standard_normal((n, d))
        u = rng.chisquare(dof, size=n)
        lower = np.linalg.cholesky(cov * (dof - 2.0) / dof + 1e-12 * np.eye(d))
        pts = (z @ lower.T) * np.sqrt(dof / u)[:, None] + mean

    pts.setflags(write=False)
    return Dataset(
        points=pts,
        inlier_mask=np.ones(n, dtype=bool),
        true_mean=mean,
        true_cov=cov,
    )


def _outlier_positions(
    attack: str,
    m: int,
    mu: np.ndarray,
    v: np.ndarray,
    magnitude: float,
    epsilon: float,
    rng: np.random.Generator,
) -> np.ndarray:
    d = mu.shape[0]
    if attack == "extreme":
        return np.tile(mu + 10.0 * magnitude * np.sqrt(d) * v, (m, 1))
    if attack == "mean_shift_conspiracy":
        return np.tile(mu + magnitude * np.sqrt(d) * v, (m, 1))
    if attack == "random_direction":
        dirs = rng.standard_normal((m, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return mu + magnitude * np.sqrt(d) * dirs
    if attack == "variance_preserving_shift":
        # displacement delta/eps with delta = magnitude * sqrt(eps)
        return np.tile(mu + (magnitude / np.sqrt(epsilon)) * v, (m, 1))
    raise InvalidParameterError(f"attack {attack!r} has no placement rule")


def corrupt(ds: Dataset, spec: ContaminationSpec) -> Dataset:
    """Apply the adversary to a clean dataset.

    Exactly floor(eps * n) mask entries flip to False under the strong
    model; at most that many under the additive model (appended outliers
    compete with inliers in the subsample). Output size always equals the
    input size, and true_mean/true_cov are carried over.

    Raises:
        InvalidParameterError: missing/partial mask, or tail_deletion under
            the additive model.
    """
    if ds.inlier_mask is None:
        raise InvalidParameterError("corrupt requires a dataset with an inlier mask")
    if not bool(ds.inlier_mask.all()):
        raise InvalidParameterError("corrupt expects a clean dataset (all-true mask)")
    n, d = ds.count, ds.dim
    eps = float(spec.epsilon)
    m = int(np.floor(eps * n))
    if m == 0:
        return ds

    rng = substream(spec.seed, "corrupt", spec.model, spec.attack)
    mu = ds.true_mean if ds.true_mean is not None else ds.points.mean(axis=0)
    v = spec.direction if spec.direction is not None else default_direction(d)
    if v.shape != (ds.dim,):
        raise InvalidParameterError(f"direction has shape {v.shape}, expected ({d},)")

    points = ds.points.copy()
    mask = np.ones(n, dtype=bool)

    if spec.model == "strong":
        proj = points @ v
        if spec.attack == "tail_deletion":
            idx = np.argsort(proj, kind="stable")[n - m :]
            keep = np.ones(n, dtype=bool)
            keep[idx] = False
            fill = points[keep].mean(axis=0)
            points[idx] = fill
            mask[idx] = False
        else:
            if spec.attack == "mean_shift_conspiracy":
                idx = np.argsort(proj, kind="stable")[:m]
            elif spec.attack == "random_direction":
                idx = np.sort(rng.choice(n, size=m, replace=False))
            else:
                idx = np.argsort(proj, kind="stable")[n - m :]
            points[idx] = _outlier_positions(
                spec.attack, m, mu, v, spec.magnitude, eps, rng
            )
            mask[idx] = False
    else:  # huber_additive
        outliers = _outlier_positions(spec.attack, m, mu, v, spec.magnitude, eps, rng)
        pool = np.vstack([points, outliers])
        pool_mask = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
        keep = np.sort(rng.choice(n + m, size=n, replace=False))
        points = pool[keep]
        mask = pool_mask[keep]

    points.setflags(write=False)
    return Dataset(points=points, inlier_mask=mask, true_mean=ds.true_mean, true_cov=ds.true_cov)
