import numpy as np
import pytest

from rstats import (
    CleanSpec,
    ContaminationSpec,
    InvalidParameterError,
    corrupt,
    generate_clean,
)


def _clean(n, d, seed, family="gaussian_identity", **kw):
    return generate_clean(CleanSpec(family=family, n=n, d=d, seed=seed, **kw))


def test_generate_clean_mean_concentration():
    ds = _clean(10_000, 2, seed=3)
    assert np.linalg.norm(ds.points.mean(axis=0)) <= 0.05
    assert ds.inlier_mask.all()
    assert np.array_equal(ds.true_mean, np.zeros(2))
    assert np.array_equal(ds.true_cov, np.eye(2))


def test_generate_single_point():
    ds = _clean(1, 3, seed=0)
    assert ds.count == 1
    assert list(ds.inlier_mask) == [True]


def test_generate_deterministic():
    a = _clean(500, 4, seed=11)
    b = _clean(500, 4, seed=11)
    assert np.array_equal(a.points, b.points)
    c = _clean(500, 4, seed=12)
    assert not np.array_equal(a.points, c.points)


def test_gaussian_cov_family(rng):
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    ds = _clean(200_000, 2, seed=5, family="gaussian_cov", cov=cov)
    emp = np.cov(ds.points.T, bias=True)
    assert np.abs(emp - cov).max() < 0.05


def test_heavy_tail_family_scale():
    # t with dof=3 rescaled to unit covariance: median |x| per coordinate
    # equals the 0.75 t-quantile times the 1/sqrt(3) scale
    ds = _clean(100_000, 1, seed=9, family="bounded_cov_heavy_tail", dof=3)
    med = np.median(np.abs(ds.points))
    assert abs(med - 0.7649 / np.sqrt(3.0)) < 0.01
    with pytest.raises(InvalidParameterError):
        CleanSpec(family="bounded_cov_heavy_tail", n=10, d=1, dof=2)


def test_corrupt_noop_at_zero_eps():
    ds = _clean(50, 3, seed=1)
    spec = ContaminationSpec(model="strong", epsilon=0.0, attack="extreme", seed=2)
    assert corrupt(ds, spec) is ds


def test_corrupt_requires_clean_mask():
    ds = Dataset = _clean(50, 3, seed=1)
    spec = ContaminationSpec(model="strong", epsilon=0.1, attack="extreme", seed=2)
    once = corrupt(ds, spec)
    with pytest.raises(InvalidParameterError):
        corrupt(once, spec)


def test_conspiracy_exact_arithmetic():
    ds = _clean(10, 4, seed=21)
    v = np.array([1.0, 0.0, 0.0, 0.0])
    spec = ContaminationSpec(
        model="strong", epsilon=0.2, attack="mean_shift_conspiracy",
        direction=v, magnitude=1.0, seed=3,
    )
    out = corrupt(ds, spec)
    replaced = ~out.inlier_mask
    assert replaced.sum() == 2
    # placement is exactly mu + sqrt(d) * v = (2, 0, 0, 0)
    assert np.array_equal(out.points[replaced], np.tile([2.0, 0, 0, 0], (2, 1)))
    # mean shift = 0.2 * placement - 0.2 * (mean of removed points)
    removed_mean = ds.points[replaced].mean(axis=0)
    expected = ds.points.mean(axis=0) - 0.2 * removed_mean + 0.2 * np.array([2.0, 0, 0, 0])
    assert np.allclose(out.points.mean(axis=0), expected, atol=1e-12)


def test_budget_exact_for_strong_bounded_for_huber():
    ds = _clean(997, 5, seed=31)
    for attack in ("extreme", "mean_shift_conspiracy", "random_direction",
                   "variance_preserving_shift", "tail_deletion"):
        out = corrupt(ds, ContaminationSpec(model="strong", epsilon=0.13, attack=attack, seed=7))
        assert (~out.inlier_mask).sum() == int(np.floor(0.13 * 997))
        assert out.count == 997
    hub = corrupt(ds, ContaminationSpec(model="huber_additive", epsilon=0.13, attack="extreme", seed=7))
    assert hub.count == 997
    assert (~hub.inlier_mask).sum() <= int(np.floor(0.13 * 997))


def test_huber_cannot_delete():
    with pytest.raises(InvalidParameterError):
        ContaminationSpec(model="huber_additive", epsilon=0.1, attack="tail_deletion")


def test_conspiracy_mean_displacement_scale():
    # coordinated displacement corrupts the mean by about eps * sqrt(d)
    ds = _clean(100_000, 100, seed=41)
    out = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.1, attack="mean_shift_conspiracy", magnitude=1.0, seed=42))
    err = np.linalg.norm(out.points.mean(axis=0) - ds.true_mean)
    assert 0.7 * 0.1 * 10 <= err <= 1.3 * 0.1 * 10 * 1.3


def test_random_direction_cancellation():
    # random placements cancel: corrupted mean error stays near the clean one
    excesses = []
    for seed in range(50):
        ds = _clean(20_000, 100, seed=500 + seed)
        out = corrupt(ds, ContaminationSpec(
            model="strong", epsilon=0.1, attack="random_direction", magnitude=1.0, seed=600 + seed))
        clean_err = np.linalg.norm(ds.points.mean(axis=0))
        corr_err = np.linalg.norm(out.points.mean(axis=0))
        excesses.append(corr_err - clean_err)
    assert np.mean(excesses) < 0.2 * 0.1 * 10


def test_variance_preserving_stays_stealthy():
    ds = _clean(10_000, 50, seed=51)
    out = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.1, attack="variance_preserving_shift", magnitude=1.0, seed=52))
    cov = np.cov(out.points.T, bias=True)
    top = np.linalg.eigvalsh(cov)[-1]
    assert top <= 1.0 + 1.0 + 0.2


def test_tail_deletion_biases_mean_low():
    ds = _clean(20_000, 4, seed=61)
    v = np.full(4, 0.5)
    out = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.1, attack="tail_deletion", direction=v, seed=62))
    assert out.count == ds.count
    assert (out.points.mean(axis=0) - ds.points.mean(axis=0)) @ v < -0.05


def test_corrupt_deterministic_per_seed():
    ds = _clean(300, 6, seed=71)
    spec = ContaminationSpec(model="strong", epsilon=0.2, attack="random_direction", seed=72)
    a = corrupt(ds, spec)
    b = corrupt(ds, spec)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.inlier_mask, b.inlier_mask)
