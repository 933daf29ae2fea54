"""Why classical robust estimators break in high dimensions.

An adversary replaces a 10% fraction of a spherical Gaussian sample with
points displaced by sqrt(d) along one coordinated direction. Per-point,
the outliers look perfectly ordinary (a typical sample sits at distance
about sqrt(d) anyway), yet the sample mean moves by about 0.1 * sqrt(d),
and so do the coordinate-wise and geometric medians. The spectral filter's
error stays flat as the dimension grows.
"""

import numpy as np

from rstats import (
    CleanSpec,
    ContaminationSpec,
    RobustMeanConfig,
    coordinate_wise_median,
    corrupt,
    generate_clean,
    geometric_median,
    robust_mean,
)

EPS = 0.1


def one_dim(d, seed=0):
    n = round(4 * d / EPS**2)
    clean = generate_clean(CleanSpec(family="gaussian_identity", n=n, d=d, seed=seed))
    bad = corrupt(clean, ContaminationSpec(
        model="strong", epsilon=EPS, attack="mean_shift_conspiracy",
        magnitude=1.0, seed=seed + 1))
    truth = clean.true_mean

    err = lambda est: float(np.linalg.norm(est - truth))
    filt = robust_mean(bad, EPS, "subgaussian_identity", RobustMeanConfig(seed=seed))
    return {
        "sample mean": err(bad.points.mean(axis=0)),
        "coord median": err(coordinate_wise_median(bad)),
        "geom median": err(geometric_median(bad)),
        "filter": err(filt.mean),
        "certificate": filt.certificate.bound,
    }


def main():
    dims = (10, 50, 100, 200)
    rows = {d: one_dim(d, seed=31 * d) for d in dims}
    cols = ["sample mean", "coord median", "geom median", "filter", "certificate"]
    print(f"eps = {EPS}, attack: coordinated shift of magnitude sqrt(d)")
    print(f"{'d':>5} {'0.1*sqrt(d)':>12} " + " ".join(f"{c:>13}" for c in cols))
    for d in dims:
        vals = " ".join(f"{rows[d][c]:13.3f}" for c in cols)
        print(f"{d:5d} {EPS * np.sqrt(d):12.3f} {vals}")
    print()
    print("The classical estimators grow like 0.1 * sqrt(d) without bound. Below")
    print("the spectral detection threshold (small d) the filter certifies the")
    print("sample mean as-is; once the conspiracy is spectrally visible it is")
    print("removed outright, and the error stops growing with the dimension.")


if __name__ == "__main__":
    main()
