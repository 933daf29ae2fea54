"""Classical location estimators and the pruning preprocessor.

These serve two roles: comparison points that demonstrably break under
coordinated high-dimensional contamination, and subroutines (pruning,
one-dimensional trimming) used by the robust pipelines.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, WeightedSet
from .errors import DegenerateDataError, InvalidParameterError


def _as_points(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.points
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


def sample_mean(W: WeightedSet) -> np.ndarray:
    """Weighted empirical mean sum_i w_i x_i."""
    return W.weights @ W.base.points


def coordinate_wise_median(T) -> np.ndarray:
    """Per-coordinate median; even counts take the lower median.

    The lower-median convention (order statistic at index (n-1)//2) keeps
    the estimate an actual data value and makes results reproducible
    without midpoint averaging.
    """
    pts = _as_points(T)
    n = pts.shape[0]
    k = (n - 1) // 2
    return np.partition(pts, k, axis=0)[k]


def _lower_median_1d(values: np.ndarray) -> float:
    n = values.shape[0]
    k = (n - 1) // 2
    return float(np.partition(values, k)[k])


def geometric_median(
    T,
    tol: float = 1e-10,
    max_iter: int = 1000,
    return_info: bool = False,
):
    """Point minimizing the sum of Euclidean distances, by Weiszfeld iteration.

    Coincident-point singularities are handled with the standard shift rule:
    when the iterate lands on a data point, the subgradient optimality
    condition is tested, and if it holds the point is returned; otherwise
    the iterate is pushed off the singularity along the residual direction.

    Args:
        T: Dataset or (n, d) array.
        tol: relative step-size stopping tolerance.
        max_iter: iteration budget; hitting it sets converged=False.
        return_info: when True, also return a dict with keys
            "converged", "iterations", "objective".

    Returns:
        The median as a (d,) array, or (median, info) with return_info.
    """
    pts = _as_points(T)
    n, d = pts.shape
    if n == 1:
        y = pts[0].copy()
        return (y, {"converged": True, "iterations": 0, "objective": 0.0}) if return_info else y

    y = pts.mean(axis=0)
    scale = max(1.0, float(np.abs(pts).max()))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        coincident = dist < 1e-14 * scale
        if coincident.any():
            eta = int(coincident.sum())
            rest = ~coincident
            inv = 1.0 / dist[rest]
            r_vec = diff[rest].T @ inv  # negative subgradient of the smooth part
            r = float(np.linalg.norm(r_vec))
            if r <= eta:  # optimality at the data point
                converged = True
                break
            t_point = (pts[rest].T @ inv) / inv.sum()
            step = min(1.0, eta / r)
            y_new = (1.0 - step) * t_point + step * y
        else:
            inv = 1.0 / dist
            y_new = (pts.T @ inv) / inv.sum()
        move = float(np.linalg.norm(y_new - y))
        y = y_new
        if move <= tol * (1.0 + float(np.linalg.norm(y))):
            converged = True
            break

    if return_info:
        objective = float(np.linalg.norm(pts - y, axis=1).sum())
        return y, {"converged": converged, "iterations": iterations, "objective": objective}
    return y


def geometric_median_objective(point: np.ndarray, T) -> float:
    """Sum of distances from `point` to the points of T."""
    pts = _as_points(T)
    return float(np.linalg.norm(pts - np.asarray(point, dtype=np.float64), axis=1).sum())


def trimmed_mean_1d(values, eps: float) -> float:
    """Mean after dropping ceil(eps * n) values from each end.

    Falls back to the (lower) median when trimming would leave nothing.
    """
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    n = vals.shape[0]
    if n < 1:
        raise DegenerateDataError("empty value list")
    if not (0.0 <= eps < 1.0):
        raise InvalidParameterError(f"eps must lie in [0, 1), got {eps}")
    k = int(np.ceil(eps * n))
    if 2 * k >= n:
        return _lower_median_1d(vals)
    srt = np.sort(vals)
    return float(srt[k : n - k].mean())


def prune_extremes(T: Dataset, radius_mult: float = 4.0, return_index: bool = False):
    """Drop points farther than radius_mult * sqrt(d) from the coordinate-wise median.

    A cheap preprocessor: typical points of an isotropic sample sit at
    distance about sqrt(d) from the center, so only egregious outliers
    exceed the radius. Raises DegenerateDataError if nothing survives.
    """
    if radius_mult <= 0:
        raise InvalidParameterError("radius_mult must be positive")
    center = coordinate_wise_median(T)
    pts = T.points
    # ||x - c||^2 = ||x||^2 - 2 x.c + ||c||^2, avoiding an (n, d) temporary
    sq = np.einsum("ij,ij->i", pts, pts) - 2.0 * (pts @ center) + center @ center
    keep = np.maximum(sq, 0.0) <= (radius_mult * radius_mult) * T.dim
    if not keep.any():
        raise DegenerateDataError("pruning removed every point")
    pruned = T.subset(keep) if not keep.all() else T
    if return_index:
        return pruned, np.nonzero(keep)[0]
    return pruned
