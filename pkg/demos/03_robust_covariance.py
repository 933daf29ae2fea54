"""Robust covariance estimation by bootstrapped whitening.

Covariance estimation reduces to mean estimation: pair differences center
the data without knowing the mean, and flattening x -> vec(x x^T) turns
second moments into first moments. The catch is scale: the flattened
variable's spread depends on the unknown answer, so the estimate is
bootstrapped from a provable upper bound, halving the multiplicative
error each round. The trace below shows the Mahalanobis error collapsing
from the initial 2x-inflated guess to the sampling floor.
"""

import numpy as np

from rstats import (
    CleanSpec,
    ContaminationSpec,
    corrupt,
    generate_clean,
    mahalanobis_error,
    pair_difference_centering,
    robust_covariance,
    robust_gaussian_fit,
)


def main():
    d = 10
    cov = np.diag([4.0] + [1.0] * (d - 1))
    mean = np.zeros(d)
    mean[0] = 3.0
    clean = generate_clean(CleanSpec(
        family="gaussian_cov", n=80_000, d=d, mean=mean, cov=cov, seed=3))
    bad = corrupt(clean, ContaminationSpec(
        model="strong", epsilon=0.05, attack="mean_shift_conspiracy",
        magnitude=6.0, seed=4))

    pairs = pair_difference_centering(bad, seed=0)
    naive = 2.0 * pairs.points.T @ pairs.points / pairs.count
    print(f"true covariance: diag(4, 1, ..., 1); contamination eps = 0.05")
    print(f"unfiltered pair-difference estimate: Mahalanobis error "
          f"{mahalanobis_error(naive, cov):.2f}")

    est = robust_covariance(bad, 0.05)
    print("\nbootstrap trace (Mahalanobis error after each round):")
    for k, e in enumerate(est.error_trace):
        stage = "initial upper bound" if k == 0 else f"round {k}"
        print(f"  {stage:>19}: {e:.3f}")
    print(f"final error {est.mahalanobis_error:.3f} "
          f"(information floor ~ sqrt(eps) = {np.sqrt(0.05):.3f})")

    mu_hat, cov_est = robust_gaussian_fit(bad, 0.05)
    white = np.linalg.inv(np.linalg.cholesky(cov))
    print(f"\nfull Gaussian fit: whitened mean error "
          f"{np.linalg.norm(white @ (mu_hat - mean)):.3f}, "
          f"covariance error {cov_est.mahalanobis_error:.3f}")


if __name__ == "__main__":
    main()
