"""Config-driven benchmark sweeps and error evaluation.

A sweep is the Cartesian product of (method, dimension, epsilon, attack,
seed). Each cell draws a clean sample, corrupts it, runs the estimator,
and records errors against the carried ground truth. Per-cell seeds are
derived by hashing the cell coordinates, so results are independent of
execution order and adding grid points never perturbs existing cells.
"""

from __future__ import annotations

import ast
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._seeds import stable_hash64
from .baselines import coordinate_wise_median, geometric_median, trimmed_mean_1d
from .contamination import ATTACKS, CleanSpec, ContaminationSpec, corrupt, generate_clean
from .covariance import CovarianceConfig, mahalanobis_error, robust_covariance
from .dataset import Dataset, uniform_weights
from .errors import InvalidParameterError
from .filters import RobustMeanConfig, robust_mean

CSV_COLUMNS = (
    "method",
    "d",
    "eps",
    "attack",
    "seed",
    "l2_error",
    "mahalanobis_error",
    "runtime_ms",
    "iterations",
    "certified",
    "certificate_value",
    "error",
)


def evaluate_mean(estimate: np.ndarray, true_mean: np.ndarray) -> float:
    """Euclidean distance between an estimate and the true mean."""
    est = np.asarray(estimate, dtype=np.float64).reshape(-1)
    tru = np.asarray(true_mean, dtype=np.float64).reshape(-1)
    if est.shape != tru.shape:
        raise InvalidParameterError(
            f"dimension mismatch: estimate {est.shape} vs truth {tru.shape}"
        )
    return float(np.linalg.norm(est - tru))


def evaluate_cov(estimate: np.ndarray, true_cov: np.ndarray) -> tuple[float, float]:
    """(Mahalanobis, Frobenius) errors of a covariance estimate."""
    est = np.asarray(estimate, dtype=np.float64)
    tru = np.asarray(true_cov, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 2:
        raise InvalidParameterError(
            f"shape mismatch: estimate {est.shape} vs truth {tru.shape}"
        )
    return mahalanobis_error(est, tru), float(np.linalg.norm(est - tru))


# ---------------------------------------------------------------------------
# Sweep configuration
# ---------------------------------------------------------------------------

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Constant,
    ast.Name,
    ast.Load,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.FloorDiv,
    ast.Pow,
    ast.USub,
    ast.UAdd,
)


def eval_n_rule(rule: str, d: int, eps: float) -> int:
    """Evaluate a sample-size expression over (d, eps), e.g. "4*d/eps^2".

    Only arithmetic on the two variables is allowed; '^' is power.
    """
    tree = ast.parse(rule.replace("^", "**"), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise InvalidParameterError(f"disallowed element in n_rule: {rule!r}")
        if isinstance(node, ast.Name) and node.id not in ("d", "eps"):
            raise InvalidParameterError(f"unknown variable {node.id!r} in n_rule")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise InvalidParameterError("n_rule constants must be numeric")

    def _ev(node):
        if isinstance(node, ast.Expression):
            return _ev(node.body)
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return float(d) if node.id == "d" else float(eps)
        if isinstance(node, ast.UnaryOp):
            val = _ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        left, right = _ev(node.left), _ev(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, ast.FloorDiv):
            return left // right
        return left**right

    n = int(round(_ev(tree)))
    if n < d + 1:
        raise InvalidParameterError(f"n_rule gave n={n} < d+1={d + 1}")
    return n


@dataclass(frozen=True)
class SweepConfig:
    """Grid specification for a benchmark sweep.

    methods: list of dicts, each with a "name" key (one of: mean, cwmedian,
        geomedian, trimmed, filter, cov) plus method-specific options
        ("assumption", "scheme" for filter).
    attacks: list of dicts with "attack" plus optional "model", "magnitude".
    family/dof describe the clean sample; n_rule sets n per (d, eps) cell.
    record_runtime keeps wall-clock timings in the output at the price of
    byte-reproducibility (off by default).
    """

    methods: tuple
    dims: tuple
    eps_grid: tuple
    attacks: tuple
    seeds: int
    n_rule: str = "4*d/eps^2"
    family: str = "gaussian_identity"
    dof: int = 3
    master_seed: int = 0
    workers: int = 1
    record_runtime: bool = False

    def __post_init__(self):
        if not (self.methods and self.dims and self.eps_grid and self.attacks):
            raise InvalidParameterError("sweep grids must be nonempty")
        if self.seeds < 1:
            raise InvalidParameterError("need at least one seed")
        for attack in self.attacks:
            if attack.get("attack") not in ATTACKS:
                raise InvalidParameterError(f"unknown attack in config: {attack!r}")

    @staticmethod
    def from_dict(raw: dict) -> "SweepConfig":
        methods = tuple(
            {"name": m} if isinstance(m, str) else dict(m) for m in raw["methods"]
        )
        attacks = tuple(
            {"attack": a} if isinstance(a, str) else dict(a) for a in raw["attacks"]
        )
        return SweepConfig(
            methods=methods,
            dims=tuple(int(d) for d in raw["dims"]),
            eps_grid=tuple(float(e) for e in raw["eps_grid"]),
            attacks=attacks,
            seeds=int(raw["seeds"]),
            n_rule=raw.get("n_rule", "4*d/eps^2"),
            family=raw.get("family", "gaussian_identity"),
            dof=int(raw.get("dof", 3)),
            master_seed=int(raw.get("master_seed", 0)),
            workers=int(raw.get("workers", 1)),
            record_runtime=bool(raw.get("record_runtime", False)),
        )


@dataclass
class ErrorRecord:
    method: str
    d: int
    eps: float
    attack: str
    seed: int
    l2_error: float | None = None
    mahalanobis_error: float | None = None
    runtime_ms: float = 0.0
    iterations: int = 0
    certified: bool | None = None
    certificate_value: float | None = None
    error: str = ""

    def sort_key(self):
        return (self.method, self.d, self.eps, self.attack, self.seed)

    def to_row(self) -> list[str]:
        def fmt(value):
            if value is None:
                return ""
            if isinstance(value, bool):
                return "true" if value else "false"
            if isinstance(value, float):
                return repr(value)
            return str(value)

        return [
            self.method,
            str(self.d),
            repr(self.eps),
            self.attack,
            str(self.seed),
            fmt(self.l2_error),
            fmt(self.mahalanobis_error),
            fmt(self.runtime_ms),
            str(self.iterations),
            fmt(self.certified),
            fmt(self.certificate_value),
            self.error,
        ]


def _run_method(method: dict, data: Dataset, eps: float, cell_seed: int, record: ErrorRecord):
    name = method["name"]
    truth = data.true_mean
    if name == "mean":
        est = uniform_weights(data, 0.0).weights @ data.points
        record.l2_error = evaluate_mean(est, truth)
    elif name == "cwmedian":
        record.l2_error = evaluate_mean(coordinate_wise_median(data), truth)
    elif name == "geomedian":
        est, info = geometric_median(data, return_info=True)
        record.l2_error = evaluate_mean(est, truth)
        record.iterations = info["iterations"]
    elif name == "trimmed":
        est = np.array([trimmed_mean_1d(col, eps) for col in data.points.T])
        record.l2_error = evaluate_mean(est, truth)
    elif name == "filter":
        cfg = RobustMeanConfig(
            scheme=method.get("scheme", "randomized_thresholding"),
            seed=cell_seed,
        )
        res = robust_mean(data, eps, method.get("assumption", "subgaussian_identity"), cfg)
        record.l2_error = evaluate_mean(res.mean, truth)
        record.iterations = 0 if res.trace is None else res.trace.iteration
        record.certified = True
        record.certificate_value = res.certificate.bound
    elif name == "cov":
        est = robust_covariance(data, eps, config=CovarianceConfig(seed=cell_seed))
        record.mahalanobis_error = est.mahalanobis_error
        record.iterations = est.iterations
        if data.true_mean is not None:
            record.l2_error = None
    else:
        raise InvalidParameterError(f"unknown method {name!r}")


def run_cell(config: SweepConfig, method: dict, d: int, eps: float, attack: dict, seed_index: int) -> ErrorRecord:
    name = method["name"]
    attack_name = attack["attack"]
    record = ErrorRecord(method=name, d=d, eps=eps, attack=attack_name, seed=seed_index)
    cell_seed = stable_hash64(config.master_seed, name, d, float(eps), attack_name, seed_index)
    start = time.perf_counter()
    try:
        n = eval_n_rule(config.n_rule, d, eps)
        clean = generate_clean(
            CleanSpec(family=config.family, n=n, d=d, dof=config.dof, seed=cell_seed)
        )
        spec = ContaminationSpec(
            model=attack.get("model", "strong"),
            epsilon=eps,
            attack=attack_name,
            magnitude=float(attack.get("magnitude", 1.0)),
            seed=cell_seed,
        )
        data = corrupt(clean, spec)
        _run_method(method, data, eps, cell_seed, record)
    except Exception as exc:  # recorded, never aborts the sweep
        record.error = f"{type(exc).__name__}: {exc}"
    if config.record_runtime:
        record.runtime_ms = (time.perf_counter() - start) * 1000.0
    return record


def run_sweep(
    config: SweepConfig,
    output_path: str | None = None,
    execution_order: list[int] | None = None,
) -> list[ErrorRecord]:
    """Execute the full grid and (optionally) write the sorted CSV.

    `execution_order` permutes cell execution (used to verify order
    independence); output is always sorted by (method, d, eps, attack,
    seed) before writing.
    """
    cells = [
        (method, d, eps, attack, seed_index)
        for method in config.methods
        for d in config.dims
        for eps in config.eps_grid
        for attack in config.attacks
        for seed_index in range(config.seeds)
    ]
    order = list(range(len(cells))) if execution_order is None else list(execution_order)
    if sorted(order) != list(range(len(cells))):
        raise InvalidParameterError("execution_order must be a permutation of the cells")

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(lambda i: run_cell(config, *cells[i]), order))
    else:
        records = [run_cell(config, *cells[i]) for i in order]
    records.sort(key=ErrorRecord.sort_key)

    if output_path is not None:
        write_records_csv(records, output_path)
    return records


def write_records_csv(records: list[ErrorRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(rec.to_row()) + "\n")
