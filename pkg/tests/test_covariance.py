import numpy as np
import pytest

from rstats import (
    CleanSpec,
    ContaminationSpec,
    CovarianceConfig,
    Dataset,
    DegenerateDataError,
    corrupt,
    flatten_second_moments,
    generate_clean,
    mahalanobis_error,
    pair_difference_centering,
    robust_covariance,
    robust_gaussian_fit,
    trimmed_mean_1d,
)
from rstats._seeds import stable_hash64


def test_pair_difference_two_points():
    ds = Dataset(points=np.array([[1.0, 2.0], [3.0, 6.0]]),
                 inlier_mask=np.array([True, True]))
    out = pair_difference_centering(ds, seed=0)
    assert out.count == 1
    assert np.allclose(np.abs(out.points[0]), np.array([2.0, 4.0]) / np.sqrt(2.0))
    assert np.array_equal(out.true_mean, np.zeros(2))


def test_pair_difference_mask_is_and():
    pts = np.zeros((6, 1))
    mask = np.array([True, True, True, False, False, False])
    ds = Dataset(points=pts, inlier_mask=mask)
    out = pair_difference_centering(ds, seed=3)
    # a pair is clean only when both endpoints are clean; with half the
    # points dirty the dirty-pair fraction can reach but not exceed 2*eps
    assert out.count == 3
    assert (~out.inlier_mask).sum() <= 2 * 3
    ds2 = Dataset(points=np.zeros((4, 1)),
                  inlier_mask=np.array([True, True, True, False]))
    out2 = pair_difference_centering(ds2, seed=1)
    assert (~out2.inlier_mask).sum() <= 1 * 2  # floor(eps*n)=1 dirty point


def test_pair_difference_preserves_covariance():
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    ds = generate_clean(CleanSpec(family="gaussian_cov", n=100_000, d=2, cov=cov, seed=5))
    out = pair_difference_centering(ds, seed=6)
    emp = out.points.T @ out.points / out.count
    assert np.linalg.norm(emp - cov) < 0.05


def test_pair_difference_needs_two_points():
    with pytest.raises(DegenerateDataError):
        pair_difference_centering(Dataset(points=np.zeros((1, 2))), seed=0)


def test_flatten_examples():
    out = flatten_second_moments(Dataset(points=np.array([[2.0]])))
    assert np.array_equal(out.points, [[4.0]])
    out2 = flatten_second_moments(Dataset(points=np.array([[1.0, 2.0]])))
    assert np.array_equal(out2.points, [[1.0, 2.0, 2.0, 4.0]])


def test_flatten_mean_is_vec_covariance():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=100_000, d=10, seed=9))
    flat = flatten_second_moments(ds)
    assert np.array_equal(flat.true_mean, np.eye(10).reshape(-1))
    emp = flat.points.mean(axis=0).reshape(10, 10)
    assert np.abs(emp - np.eye(10)).max() < 3.0 / np.sqrt(ds.count)


def test_clean_covariance_estimate():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=50_000, d=10, seed=13))
    est = robust_covariance(ds, 0.05)
    assert est.mahalanobis_error <= 0.15
    assert np.allclose(est.sigma_hat, est.sigma_hat.T)
    assert np.linalg.eigvalsh(est.sigma_hat).min() > 0.0


def test_corrupted_covariance_estimate():
    ds = generate_clean(CleanSpec(family="gaussian_cov", n=60_000, d=10, seed=15,
                                  cov=np.diag([4.0] + [1.0] * 9)))
    bad = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.05, attack="mean_shift_conspiracy", magnitude=6.0, seed=16))
    est = robust_covariance(bad, 0.05)
    assert est.mahalanobis_error <= 5 * np.sqrt(0.05)
    # the unfiltered pair-difference estimate is far worse
    pairs = pair_difference_centering(bad, seed=stable_hash64(0, "pairs"))
    naive = 2.0 * pairs.points.T @ pairs.points / pairs.count
    assert mahalanobis_error(naive, ds.true_cov) > 2 * est.mahalanobis_error


def test_one_dimensional_variance_against_trimmed_oracle():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=20_000, d=1, seed=5))
    bad = corrupt(ds, ContaminationSpec(model="strong", epsilon=0.1, attack="extreme", seed=6))
    est = robust_covariance(bad, 0.1)
    pairs = pair_difference_centering(bad, seed=stable_hash64(0, "pairs"))
    oracle = trimmed_mean_1d(pairs.points[:, 0] ** 2, 0.2)
    assert abs(est.sigma_hat[0, 0] - oracle) <= 0.2 * oracle


def test_initialization_upper_bounds_clean_covariance():
    for seed in range(3):
        ds = generate_clean(CleanSpec(family="gaussian_identity", n=30_000, d=8, seed=20 + seed))
        bad = corrupt(ds, ContaminationSpec(
            model="strong", epsilon=0.1, attack="mean_shift_conspiracy", magnitude=2.0, seed=30 + seed))
        from rstats.baselines import prune_extremes

        pairs = pair_difference_centering(bad, seed=stable_hash64(0, "pairs"))
        pruned = prune_extremes(pairs, 4.0)
        cen = pruned.points - pruned.points.mean(axis=0)
        sigma0 = 2.0 * cen.T @ cen / pruned.count
        clean_pairs = pair_difference_centering(ds, seed=stable_hash64(1, "clean"))
        clean_cov = clean_pairs.points.T @ clean_pairs.points / clean_pairs.count
        assert np.linalg.eigvalsh(sigma0 - clean_cov + 0.1 * np.eye(8)).min() >= 0.0


def test_error_contraction_along_trace():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=60_000, d=10, seed=40))
    bad = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.05, attack="mean_shift_conspiracy", magnitude=3.0, seed=41))
    est = robust_covariance(bad, 0.05)
    floor = 5 * np.sqrt(0.05)
    for prev, nxt in zip(est.error_trace, est.error_trace[1:]):
        assert nxt <= 0.8 * prev + floor
    assert est.mahalanobis_error <= floor


def test_affine_equivariance_up_to_tolerance(rng):
    base = generate_clean(CleanSpec(family="gaussian_identity", n=50_000, d=5, seed=50))
    est = robust_covariance(base, 0.02)
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    a = q @ np.diag([0.6, 0.9, 1.1, 1.4, 2.0]) @ q.T
    transformed = Dataset(points=base.points @ a.T,
                          inlier_mask=base.inlier_mask,
                          true_mean=a @ base.true_mean,
                          true_cov=a @ base.true_cov @ a.T)
    est_a = robust_covariance(transformed, 0.02)
    target = a @ est.sigma_hat @ a.T
    assert np.linalg.norm(est_a.sigma_hat - target) <= 0.05 * np.linalg.norm(target)


def test_rejects_large_eps():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=100, d=2, seed=0))
    with pytest.raises(Exception):
        robust_covariance(ds, 0.2)


def test_gaussian_fit_clean():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=50_000, d=10, seed=60))
    mu_hat, est = robust_gaussian_fit(ds, 0.05)
    assert np.linalg.norm(mu_hat) <= 0.1
    assert est.mahalanobis_error <= 0.15


def test_gaussian_fit_corrupted_anisotropic():
    cov = np.diag([4.0] + [1.0] * 9)
    mean = np.zeros(10)
    mean[0] = 3.0
    ds = generate_clean(CleanSpec(family="gaussian_cov", n=60_000, d=10, mean=mean, cov=cov, seed=61))
    bad = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.05, attack="mean_shift_conspiracy", magnitude=6.0, seed=62))
    mu_hat, est = robust_gaussian_fit(bad, 0.05, CovarianceConfig(seed=63))
    whit = np.linalg.inv(np.linalg.cholesky(cov))
    assert np.linalg.norm(whit @ (mu_hat - mean)) <= 5 * np.sqrt(0.05)
    assert est.mahalanobis_error <= 5 * np.sqrt(0.05)
