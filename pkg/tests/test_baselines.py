import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rstats import (
    CleanSpec,
    ContaminationSpec,
    Dataset,
    DegenerateDataError,
    WeightedSet,
    coordinate_wise_median,
    corrupt,
    generate_clean,
    geometric_median,
    prune_extremes,
    sample_mean,
    trimmed_mean_1d,
    uniform_weights,
)
from rstats.baselines import geometric_median_objective
from conftest import grid_geometric_median_objective


def test_sample_mean_examples():
    ds = Dataset(points=np.array([[0.0, 0.0], [2.0, 2.0]]))
    assert np.array_equal(sample_mean(uniform_weights(ds, 0.0)), [1.0, 1.0])
    ws = WeightedSet(base=ds, weights=np.array([1.0, 0.0]), epsilon=0.5)
    assert np.array_equal(sample_mean(ws), [0.0, 0.0])


def test_sample_mean_matches_resummation(rng):
    pts = rng.standard_normal((300, 4))
    w = rng.random(300) + 0.5
    w = w / w.sum()
    eps = 1.0 - 1.0 / (300 * w.max()) + 1e-9
    ws = WeightedSet(base=Dataset(points=pts), weights=w, epsilon=eps)
    direct = sample_mean(ws)
    # independent route: sum in reverse order with Python floats
    other = np.array([sum(float(w[i]) * float(pts[i, j]) for i in reversed(range(300)))
                      for j in range(4)])
    assert np.abs(direct - other).max() < 1e-12


def test_coordinate_wise_median_examples():
    assert np.array_equal(
        coordinate_wise_median(np.array([[0.0, 5.0], [1.0, 1.0], [2.0, 0.0]])), [1.0, 1.0]
    )
    assert np.array_equal(coordinate_wise_median(np.array([[3.0, 4.0]])), [3.0, 4.0])


def test_coordinate_wise_median_matches_sort(rng):
    for _ in range(100):
        n = int(rng.integers(1, 40))
        pts = rng.standard_normal((n, 3))
        expected = np.sort(pts, axis=0)[(n - 1) // 2]
        assert np.array_equal(coordinate_wise_median(pts), expected)


@given(
    a=st.floats(0.1, 50.0),
    b=st.floats(-100.0, 100.0),
    values=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
)
@settings(max_examples=60, deadline=None)
def test_median_and_trimmed_equivariance(a, b, values):
    vals = np.asarray(values)
    med = coordinate_wise_median(vals[:, None])[0]
    med2 = coordinate_wise_median((a * vals + b)[:, None])[0]
    assert med2 == pytest.approx(a * med + b, rel=1e-12, abs=1e-9)
    tm = trimmed_mean_1d(vals, 0.2)
    tm2 = trimmed_mean_1d(a * vals + b, 0.2)
    assert tm2 == pytest.approx(a * tm + b, rel=1e-12, abs=1e-9)


def test_trimmed_mean_examples():
    assert trimmed_mean_1d([0.0, 1.0, 2.0, 3.0, 100.0], 0.2) == 2.0
    vals = [3.0, 1.0, 4.0, 1.0, 5.0]
    assert trimmed_mean_1d(vals, 0.0) == pytest.approx(np.mean(vals))
    sym = np.concatenate([np.linspace(-3, 3, 11)]) + 7.0
    for eps in (0.0, 0.1, 0.3):
        assert trimmed_mean_1d(sym, eps) == pytest.approx(7.0)
    # trimming everything falls back to the (lower) median
    assert trimmed_mean_1d([1.0, 2.0], 0.4) == 1.0


def test_geometric_median_symmetry():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    assert np.linalg.norm(geometric_median(pts)) < 1e-8


def test_geometric_median_collinear():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
    med = geometric_median(pts)
    assert np.allclose(med, [1.0, 0.0], atol=1e-7)


def test_geometric_median_on_data_point():
    # heavy multiplicity at a vertex makes that vertex optimal
    pts = np.array([[0.0, 0.0]] * 5 + [[1.0, 0.0], [0.0, 1.0]])
    med = geometric_median(pts)
    assert np.allclose(med, [0.0, 0.0], atol=1e-10)


def test_geometric_median_vs_grid_oracle(rng):
    for trial in range(3):
        pts = rng.standard_normal((7, 2))
        med, info = geometric_median(Dataset(points=pts), return_info=True)
        assert info["converged"]
        oracle = grid_geometric_median_objective(pts, resolution=2e-3)
        assert info["objective"] <= oracle + 1e-4


def test_geometric_median_monotone_descent(rng):
    pts = rng.standard_normal((25, 3))
    objs = []
    for k in range(1, 15):
        est = geometric_median(pts, tol=0.0, max_iter=k)
        objs.append(geometric_median_objective(est, pts))
    for a, b in zip(objs, objs[1:]):
        assert b <= a + 1e-12


def test_prune_keeps_clean_gaussian():
    for seed in range(10):
        ds = generate_clean(CleanSpec(family="gaussian_identity", n=10_000, d=50, seed=seed))
        assert prune_extremes(ds).count == ds.count


def test_prune_removes_planted_point():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=2000, d=10, seed=3))
    pts = ds.points.copy()
    pts[17] = 0.0
    pts[17, 0] = 100.0 * np.sqrt(10)
    planted = Dataset(points=pts, inlier_mask=ds.inlier_mask)
    pruned, kept = prune_extremes(planted, return_index=True)
    assert pruned.count == 1999
    assert 17 not in kept


def test_prune_identity_when_all_inside():
    ds = Dataset(points=np.zeros((5, 2)))
    assert prune_extremes(ds) is ds


def test_prune_degenerate_when_all_far():
    # points pairwise far from their coordinate-wise median in high dim
    pts = np.eye(3) * 100.0
    with pytest.raises(DegenerateDataError):
        prune_extremes(Dataset(points=pts), radius_mult=0.1)


def test_baselines_break_under_conspiracy():
    ds = generate_clean(CleanSpec(family="gaussian_identity", n=100_000, d=100, seed=8))
    out = corrupt(ds, ContaminationSpec(
        model="strong", epsilon=0.1, attack="mean_shift_conspiracy", magnitude=1.0, seed=9))
    floor = 0.3 * 0.1 * 10.0
    assert np.linalg.norm(coordinate_wise_median(out) - ds.true_mean) >= floor
    assert np.linalg.norm(geometric_median(out) - ds.true_mean) >= floor
    # yet the one-dimensional median along the attack direction barely moves
    v = np.full(100, 0.1)
    proj = out.points @ v
    med = np.sort(proj)[(proj.size - 1) // 2]
    assert abs(med - ds.true_mean @ v) <= 4 * 0.1
