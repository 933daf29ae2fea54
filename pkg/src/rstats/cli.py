"""Command-line interface.

Subcommands: generate, corrupt, stability, estimate, regress, sweep, eval.
All outputs are deterministic for fixed inputs and seeds: JSON is printed
with fixed key order and repr-style floats, CSV uses full-precision
decimals, and all randomness flows through seeded substreams.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .baselines import coordinate_wise_median, geometric_median, trimmed_mean_1d
from .bench import SweepConfig, evaluate_cov, evaluate_mean, run_sweep
from .contamination import ATTACKS, MODELS, CleanSpec, ContaminationSpec, corrupt, generate_clean
from .covariance import CovarianceConfig, robust_covariance
from .dataset import load_dataset, save_dataset, uniform_weights
from .errors import InvalidParameterError, RobustStatsError
from .filters import RobustMeanConfig, robust_mean
from .regression import OptConfig, load_regression, robust_gd_regression, sever_loop
from .stability import estimate_stability

_SCHEME_ALIASES = {
    "threshold": "randomized_thresholding",
    "independent": "independent_removal",
    "reweight": "deterministic_reweighting",
}
_ASSUMPTION_ALIASES = {
    "subgaussian": "subgaussian_identity",
    "boundedcov": "bounded_covariance",
}


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _parse_vector(text: str | None, d: int) -> np.ndarray | None:
    if text is None:
        return None
    vec = np.array([float(tok) for tok in text.split(",")], dtype=np.float64)
    if vec.shape != (d,):
        raise InvalidParameterError(f"vector has {vec.shape[0]} entries, expected {d}")
    return vec


def _cmd_generate(args) -> int:
    cov = None
    if args.cov is not None:
        cov = np.loadtxt(args.cov, delimiter=",", ndmin=2)
    mean = 0.0 if args.mean is None else _parse_vector(args.mean, args.d)
    spec = CleanSpec(
        family=args.family, n=args.n, d=args.d, mean=mean if mean is not None else 0.0,
        cov=cov, dof=args.dof, seed=args.seed,
    )
    ds = generate_clean(spec)
    save_dataset(ds, args.out)
    _emit({"written": args.out, "n": ds.count, "d": ds.dim})
    return 0


def _cmd_corrupt(args) -> int:
    ds = load_dataset(args.input)
    direction = _parse_vector(args.direction, ds.dim)
    if direction is not None:
        direction = direction / np.linalg.norm(direction)
    spec = ContaminationSpec(
        model=args.model,
        epsilon=args.eps,
        attack=args.attack,
        direction=direction,
        magnitude=args.magnitude,
        seed=args.seed,
    )
    out = corrupt(ds, spec)
    save_dataset(out, args.out)
    n_out = 0 if out.inlier_mask is None else int((~out.inlier_mask).sum())
    _emit({"written": args.out, "n": out.count, "outliers": n_out})
    return 0


def _cmd_stability(args) -> int:
    ds = load_dataset(args.input)
    if ds.true_mean is None:
        raise InvalidParameterError(
            "stability needs the true mean; provide a .meta.json sidecar"
        )
    report = estimate_stability(
        ds, ds.true_mean, args.eps, num_random_dirs=args.dirs, seed=args.seed
    )
    _emit(
        {
            "epsilon": report.epsilon,
            "directions_tested": report.directions_tested,
            "worst_mean_dev": report.worst_mean_dev,
            "worst_var_dev": report.worst_var_dev,
            "delta_hat": report.delta_hat,
            "witness_direction": report.witness_direction.tolist(),
        }
    )
    return 0


def _cmd_estimate(args) -> int:
    ds = load_dataset(args.input)
    payload: dict = {"method": args.method}
    if args.method == "mean":
        est = uniform_weights(ds, 0.0).weights @ ds.points
        payload["mean"] = est.tolist()
    elif args.method == "cwmedian":
        payload["mean"] = coordinate_wise_median(ds).tolist()
    elif args.method == "geomedian":
        est, info = geometric_median(ds, return_info=True)
        payload["mean"] = est.tolist()
        payload["iterations"] = info["iterations"]
        payload["converged"] = info["converged"]
    elif args.method == "trimmed":
        payload["mean"] = [trimmed_mean_1d(col, args.eps) for col in ds.points.T]
    elif args.method == "filter":
        cfg = RobustMeanConfig(scheme=_SCHEME_ALIASES[args.scheme], seed=args.seed)
        res = robust_mean(ds, args.eps, _ASSUMPTION_ALIASES[args.assumption], cfg)
        payload["mean"] = res.mean.tolist()
        payload["delta"] = res.delta
        payload["certificate_bound"] = res.certificate.bound
        payload["lambda_final"] = res.certificate.lam
        payload["pruned_count"] = res.pruned_count
        state = res.trace
        payload["filter_iterations"] = state.iteration
        if args.trace is not None:
            trace_rows = [
                {
                    "iteration": rec.iteration,
                    "eigenvalue": rec.eigenvalue,
                    "removed": rec.removed_count,
                    "removed_inliers": rec.removed_inliers,
                    "removed_outliers": rec.removed_outliers,
                    "removed_mass": rec.removed_mass,
                }
                for rec in state.removed_history
            ]
            with open(args.trace, "w", newline="") as fh:
                json.dump(trace_rows, fh, indent=2)
                fh.write("\n")
    elif args.method == "cov":
        est = robust_covariance(ds, args.eps, config=CovarianceConfig(seed=args.seed))
        if args.sigma_out:
            np.savetxt(args.sigma_out, est.sigma_hat, delimiter=",", fmt="%.17g")
            payload["sigma_written"] = args.sigma_out
        payload["iterations"] = est.iterations
        if est.mahalanobis_error is not None:
            payload["mahalanobis_error"] = est.mahalanobis_error
            payload["frobenius_error"] = est.frobenius_error
        payload["sigma_hat"] = est.sigma_hat.tolist()
    else:
        raise InvalidParameterError(f"unknown method {args.method!r}")

    if ds.true_mean is not None and "mean" in payload:
        payload["l2_error"] = evaluate_mean(np.array(payload["mean"]), ds.true_mean)
    _emit(payload)
    return 0


def _cmd_regress(args) -> int:
    data = load_regression(args.input)
    cfg = OptConfig(eps=args.eps, seed=args.seed)
    if args.method == "gd":
        res = robust_gd_regression(data, cfg)
    else:
        res = sever_loop(data, args.eps, cfg)
    payload = {
        "method": args.method,
        "w_hat": res.w_hat.tolist(),
        "iterations": res.iterations,
        "converged": res.converged,
    }
    if res.certified is not None:
        payload["certified"] = res.certified
    if res.grad_norm is not None:
        payload["grad_norm"] = res.grad_norm
    _emit(payload)
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    config = SweepConfig.from_dict(raw)
    out = args.out or raw.get("output_path")
    if out is None:
        raise InvalidParameterError("sweep needs --out or an output_path in the config")
    records = run_sweep(config, output_path=out)
    failures = sum(1 for rec in records if rec.error)
    _emit({"written": out, "rows": len(records), "failures": failures})
    return 2 if failures else 0


def _cmd_eval(args) -> int:
    with open(args.estimate) as fh:
        est = json.load(fh)
    with open(args.meta) as fh:
        meta = json.load(fh)
    payload: dict = {}
    if args.kind == "mean":
        payload["l2_error"] = evaluate_mean(
            np.array(est["mean"]), np.array(meta["true_mean"])
        )
    else:
        maha, frob = evaluate_cov(
            np.array(est["sigma_hat"]), np.array(meta["true_cov"])
        )
        payload["mahalanobis_error"] = maha
        payload["frobenius_error"] = frob
    _emit(payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rstats",
        description="Outlier-robust estimation: simulators, filters, baselines, benchmarks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a clean synthetic dataset")
    p.add_argument("--family", default="gaussian_identity",
                   choices=("gaussian_identity", "gaussian_cov", "bounded_cov_heavy_tail"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mean", help="comma-separated d-vector (default zeros)")
    p.add_argument("--cov", help="CSV file holding a d x d covariance")
    p.add_argument("--dof", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("corrupt", help="apply a contamination adversary")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="strong", choices=MODELS)
    p.add_argument("--attack", default="mean_shift_conspiracy", choices=ATTACKS)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--magnitude", type=float, default=1.0)
    p.add_argument("--direction", help="comma-separated d-vector (normalized)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_corrupt)

    p = sub.add_parser("stability", help="probe subset stability of a dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--dirs", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_stability)

    p = sub.add_parser("estimate", help="run a mean/covariance estimator")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True,
                   choices=("mean", "cwmedian", "geomedian", "trimmed", "filter", "cov"))
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--assumption", default="subgaussian", choices=tuple(_ASSUMPTION_ALIASES))
    p.add_argument("--scheme", default="threshold", choices=tuple(_SCHEME_ALIASES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write per-iteration filter trace JSON here")
    p.add_argument("--sigma-out", help="write the covariance estimate as CSV here")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("regress", help="outlier-robust linear regression")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="gd", choices=("gd", "sever"))
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_regress)

    p = sub.add_parser("sweep", help="run a config-driven benchmark sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("eval", help="evaluate an estimate JSON against a meta file")
    p.add_argument("--kind", required=True, choices=("mean", "cov"))
    p.add_argument("--estimate", required=True)
    p.add_argument("--meta", required=True)
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RobustStatsError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
