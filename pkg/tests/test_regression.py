import numpy as np
import pytest

from rstats import (
    DegenerateDataError,
    InvalidParameterError,
    OptConfig,
    RegressionData,
    corrupt_regression,
    gradient_samples,
    load_regression,
    make_regression,
    robust_gd_regression,
    robust_gradient,
    save_regression,
    sever_loop,
)


def _normal_equations(data):
    x, y = data.covariates, data.responses
    n, d = x.shape
    return np.linalg.solve(x.T @ x / n + 1e-8 * np.eye(d), x.T @ y / n)


def test_gradients_vanish_at_noiseless_optimum(rng):
    x = rng.standard_normal((50, 4))
    beta = rng.standard_normal(4)
    data = RegressionData(covariates=x, responses=x @ beta)
    grads = gradient_samples(data, beta)
    assert np.abs(grads.points).max() == 0.0


def test_gradient_arithmetic_1d():
    data = RegressionData(covariates=np.array([[2.0]]), responses=np.array([1.0]))
    grads = gradient_samples(data, np.zeros(1))
    assert np.array_equal(grads.points, [[-4.0]])


def test_gradient_mean_closed_form(rng):
    x = rng.standard_normal((2000, 6))
    beta = rng.standard_normal(6)
    data = RegressionData(covariates=x, responses=x @ beta)
    w = rng.standard_normal(6)
    mean_grad = gradient_samples(data, w).points.mean(axis=0)
    gram = x.T @ x / x.shape[0]
    assert np.abs(mean_grad - 2.0 * gram @ (w - beta)).max() < 1e-12


def test_gradient_linearity_per_point(rng):
    data = make_regression(100, 5, seed=7)
    w1 = rng.standard_normal(5)
    w2 = rng.standard_normal(5)
    g = lambda w: gradient_samples(data, w).points
    lhs = g(w1) + g(w2) - g(np.zeros(5))
    assert np.abs(lhs - g(w1 + w2)).max() < 1e-12


def test_gradient_matches_finite_differences(rng):
    data = make_regression(500, 4, seed=8)
    w = rng.standard_normal(4)
    mean_grad = gradient_samples(data, w).points.mean(axis=0)
    risk = lambda v: np.mean((data.covariates @ v - data.responses) ** 2)
    h = 1e-6
    fd = np.array([
        (risk(w + h * e) - risk(w - h * e)) / (2 * h) for e in np.eye(4)
    ])
    assert np.abs(mean_grad - fd).max() <= 1e-5 * (1.0 + np.abs(fd).max())


def test_clean_recovery_matches_normal_equations():
    data = make_regression(3000, 10, seed=9)
    res = robust_gd_regression(data, OptConfig(eps=0.0, seed=1))
    assert np.linalg.norm(res.w_hat - _normal_equations(data)) <= 1e-3
    sev = sever_loop(data, 0.0, OptConfig(eps=0.0, seed=1))
    assert np.linalg.norm(sev.w_hat - _normal_equations(data)) <= 1e-9


def test_noiseless_interpolation_recovers_beta_exactly():
    data = make_regression(500, 8, noise_sigma=0.0, seed=10)
    res = robust_gd_regression(data, OptConfig(eps=0.0, seed=2))
    assert np.linalg.norm(res.w_hat - data.true_beta) <= 1e-6


def test_robust_gradient_resists_planted_pull(rng):
    data = make_regression(4000, 20, seed=11)
    bad = corrupt_regression(data, 0.05, seed=12)
    w = rng.standard_normal(20) * 0.3
    scale = 2.0 * (1.0 + 1.0)
    from rstats.regression import _gradient_filter_params
    from rstats import RobustMeanConfig

    d_, l_ = _gradient_filter_params(0.05)
    robust = robust_gradient(bad, w, 0.05, scale, RobustMeanConfig(delta=d_, lambda_thresh=l_, seed=3))
    clean_mean = gradient_samples(data, w).points[bad.inlier_mask].mean(axis=0)
    corrupted_mean = gradient_samples(bad, w).points.mean(axis=0)
    assert np.linalg.norm(robust - clean_mean) <= 3 * np.sqrt(0.05) * scale
    assert np.linalg.norm(robust - clean_mean) < 0.2 * np.linalg.norm(corrupted_mean - clean_mean)


def test_gd_and_sever_handle_leverage_attack():
    errs_gd, errs_sev = [], []
    for seed in range(5):
        data = make_regression(4000, 30, seed=100 + seed)
        bad = corrupt_regression(data, 0.05, seed=200 + seed)
        res = robust_gd_regression(bad, OptConfig(eps=0.05, seed=seed))
        sev = sever_loop(bad, 0.05, OptConfig(eps=0.05, seed=seed))
        errs_gd.append(np.linalg.norm(res.w_hat - data.true_beta))
        errs_sev.append(np.linalg.norm(sev.w_hat - data.true_beta))
        naive = np.linalg.norm(_normal_equations(bad) - data.true_beta)
        assert naive > 1.0
    bound = 3 * np.sqrt(0.05)
    assert np.median(errs_gd) <= bound
    assert np.median(errs_sev) <= bound
    for a, b in zip(errs_gd, errs_sev):
        assert abs(a - b) <= 2 * np.sqrt(0.05)


def test_sever_removes_mostly_outliers_by_mask():
    hits = 0
    for seed in range(10):
        data = make_regression(3000, 20, seed=300 + seed)
        bad = corrupt_regression(data, 0.05, seed=400 + seed)
        res = sever_loop(bad, 0.05, OptConfig(eps=0.05, seed=seed))
        assert res.certified
        good_step = any(
            t["removed"] > 0 and t["removed_outliers"] >= (2 / 3) * t["removed"]
            for t in res.trace
        )
        hits += good_step
    assert hits >= 9


def test_sever_certifies_clean_data_first_pass():
    certified_first = 0
    for seed in range(10):
        data = make_regression(2000, 10, seed=500 + seed)
        res = sever_loop(data, 0.05, OptConfig(eps=0.05, seed=seed))
        certified_first += res.certified and res.iterations == 1
    assert certified_first >= 9


def test_gd_clean_risk_monotone_on_clean_data():
    data = make_regression(2000, 8, seed=600)
    cfg = OptConfig(eps=0.0, seed=0, grad_tol=1e-10)
    res = robust_gd_regression(data, cfg)
    assert res.converged


def test_degenerate_design_rejected():
    x = np.zeros((100, 3))
    x[:, 0] = np.random.default_rng(0).standard_normal(100)
    data = RegressionData(covariates=x, responses=x[:, 0])
    with pytest.raises(DegenerateDataError):
        robust_gd_regression(data, OptConfig(eps=0.0))


def test_regression_csv_roundtrip(tmp_path):
    data = make_regression(50, 3, seed=700)
    bad = corrupt_regression(data, 0.1, seed=701)
    path = tmp_path / "reg.csv"
    save_regression(bad, str(path))
    back = load_regression(str(path))
    assert np.max(np.abs(back.covariates - bad.covariates)) == 0.0
    assert np.max(np.abs(back.responses - bad.responses)) == 0.0
    assert np.array_equal(back.inlier_mask, bad.inlier_mask)
    assert path.read_text().splitlines()[0] == "x0,x1,x2,y,inlier"


def test_regression_data_validation():
    with pytest.raises(InvalidParameterError):
        RegressionData(covariates=np.ones((3, 2)), responses=np.ones(4))
    with pytest.raises(InvalidParameterError):
        RegressionData(covariates=np.array([[np.inf, 0.0]]), responses=np.ones(1))
