"""Shared brute-force oracles for the test suite.

Every oracle here recomputes the quantity under test by a different,
slower route (exhaustive enumeration, dense grids, naive summation), so
agreement is evidence of correctness rather than of shared bugs.
"""

import itertools

import numpy as np
import pytest


def subset_stability_oracle(points, mu_x, eps, v):
    """Exhaustive subset enumeration of the directional stability extremes.

    Feasible only for tiny n: scans every subset S' with
    |S'| >= (1 - eps) * n.
    """
    n = points.shape[0]
    m = int(np.floor(eps * n))
    proj = (points - mu_x) @ v
    mean_dev = 0.0
    var_dev = 0.0
    idx = range(n)
    for keep_size in range(n - m, n + 1):
        for subset in itertools.combinations(idx, keep_size):
            sel = proj[list(subset)]
            mean_dev = max(mean_dev, abs(sel.mean()))
            var_dev = max(var_dev, abs((sel**2).mean() - 1.0))
    return mean_dev, var_dev


def grid_geometric_median_objective(points, resolution=1e-3, padding=0.5):
    """Minimum sum-of-distances over a dense 2-d grid (d=2 only)."""
    assert points.shape[1] == 2
    lo = points.min(axis=0) - padding
    hi = points.max(axis=0) + padding
    xs = np.arange(lo[0], hi[0] + resolution, resolution)
    ys = np.arange(lo[1], hi[1] + resolution, resolution)
    best = np.inf
    # chunk the grid rows to bound memory
    for x0 in np.array_split(xs, max(1, xs.size // 256)):
        gx, gy = np.meshgrid(x0, ys, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
        dists = np.linalg.norm(grid[:, None, :] - points[None, :, :], axis=2).sum(axis=1)
        best = min(best, float(dists.min()))
    return best


def naive_weighted_covariance(points, weights):
    """O(n d^2) double-loop covariance recomputation."""
    mu = np.zeros(points.shape[1])
    for w, x in zip(weights, points):
        mu += w * x
    cov = np.zeros((points.shape[1], points.shape[1]))
    for w, x in zip(weights, points):
        diff = x - mu
        cov += w * np.outer(diff, diff)
    return cov


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
