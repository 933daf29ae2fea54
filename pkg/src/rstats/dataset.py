"""Point-set containers and CSV/JSON serialization.

A `Dataset` is an immutable n x d block of float64 points, optionally
carrying a ground-truth inlier mask and the generating distribution's
mean/covariance (used only for evaluation, never by estimators).
A `WeightedSet` attaches a capped, normalized weight vector to a dataset;
it is the state object that reweighting filters evolve.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataIOError,
    EmptyDataError,
    InvalidParameterError,
    ParseError,
)

_SYM_TOL = 1e-12
_PSD_TOL = -1e-10
_WEIGHT_SUM_TOL = 1e-9
_CAP_SLACK = 1e-12


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64, order="C")
    if out.flags.writeable:  # already-frozen arrays are safe to share
        out = out.copy()
        out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """An immutable collection of d-dimensional points.

    Attributes:
        points: (n, d) float64 array, all entries finite.
        inlier_mask: optional (n,) boolean array; True marks points drawn
            from the clean distribution, False marks adversarial points.
        true_mean: optional (d,) vector of the clean distribution's mean.
        true_cov: optional (d, d) symmetric PSD matrix of its covariance.

    The evaluation fields are carried alongside the points so benchmark
    harnesses never need side-channel files; estimators must not read them.
    """

    points: np.ndarray
    inlier_mask: np.ndarray | None = None
    true_mean: np.ndarray | None = None
    true_cov: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise InvalidParameterError(f"points must be 2-d, got shape {pts.shape}")
        n, d = pts.shape
        if n < 1 or d < 1:
            raise InvalidParameterError(f"need n >= 1 and d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameterError("points contain NaN or infinite entries")
        object.__setattr__(self, "points", _readonly(pts))

        if self.inlier_mask is not None:
            mask = np.asarray(self.inlier_mask, dtype=bool).copy()
            if mask.shape != (n,):
                raise InvalidParameterError(
                    f"inlier_mask has shape {mask.shape}, expected ({n},)"
                )
            mask.setflags(write=False)
            object.__setattr__(self, "inlier_mask", mask)

        if self.true_mean is not None:
            tm = np.asarray(self.true_mean, dtype=np.float64).reshape(-1)
            if tm.shape != (d,):
                raise InvalidParameterError(
                    f"true_mean has shape {tm.shape}, expected ({d},)"
                )
            if not np.all(np.isfinite(tm)):
                raise InvalidParameterError("true_mean contains non-finite entries")
            object.__setattr__(self, "true_mean", _readonly(tm))

        if self.true_cov is not None:
            tc = np.asarray(self.true_cov, dtype=np.float64)
            if tc.shape != (d, d):
                raise InvalidParameterError(
                    f"true_cov has shape {tc.shape}, expected ({d}, {d})"
                )
            if not np.all(np.isfinite(tc)):
                raise InvalidParameterError("true_cov contains non-finite entries")
            scale = max(1.0, float(np.abs(tc).max()))
            if np.abs(tc - tc.T).max() > _SYM_TOL * scale:
                raise InvalidParameterError("true_cov is not symmetric")
            if np.linalg.eigvalsh(tc).min() < _PSD_TOL:
                raise InvalidParameterError("true_cov is not positive semidefinite")
            object.__setattr__(self, "true_cov", _readonly(tc))

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, index) -> "Dataset":
        """New dataset holding the selected rows; metadata is propagated."""
        idx = np.asarray(index)
        pts = self.points[idx]
        pts.setflags(write=False)
        return Dataset(
            points=pts,
            inlier_mask=None if self.inlier_mask is None else self.inlier_mask[idx],
            true_mean=self.true_mean,
            true_cov=self.true_cov,
        )


@dataclass(frozen=True)
class WeightedSet:
    """A probability distribution over a dataset's points.

    Weights are nonnegative, sum to one, and each is capped at
    1 / ((1 - epsilon) * n): no single point may carry more mass than it
    would under the uniform distribution on the smallest admissible
    (1 - epsilon)-fraction subset. `epsilon` is whatever contamination
    level the cap was set for; filters raise it as they strip mass.
    """

    base: Dataset
    weights: np.ndarray
    epsilon: float

    def __post_init__(self):
        n = self.base.count
        eps = float(self.epsilon)
        if not (0.0 <= eps < 1.0):
            raise InvalidParameterError(f"epsilon must lie in [0, 1), got {eps}")
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if w.shape != (n,):
            raise InvalidParameterError(f"weights have shape {w.shape}, expected ({n},)")
        if not np.all(np.isfinite(w)):
            raise InvalidParameterError("weights contain non-finite entries")
        cap = 1.0 / ((1.0 - eps) * n)
        if w.min() < -_CAP_SLACK:
            raise InvalidParameterError("weights must be nonnegative")
        if w.max() > cap * (1.0 + 1e-9) + _CAP_SLACK:
            raise InvalidParameterError(
                f"weight {w.max():.6g} exceeds cap {cap:.6g} for epsilon={eps}"
            )
        total = float(w.sum())
        if abs(total - 1.0) > _WEIGHT_SUM_TOL:
            raise InvalidParameterError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "weights", _readonly(w))
        object.__setattr__(self, "epsilon", eps)

    @property
    def cap(self) -> float:
        return 1.0 / ((1.0 - self.epsilon) * self.base.count)

    def support(self) -> np.ndarray:
        """Boolean mask of points with strictly positive weight."""
        return self.weights > 0.0


def uniform_weights(ds: Dataset, epsilon: float) -> WeightedSet:
    """Uniform distribution over the dataset, capped for the given epsilon.

    Raises:
        InvalidParameterError: if epsilon is outside [0, 1/2).
    """
    eps = float(epsilon)
    if not (0.0 <= eps < 0.5):
        raise InvalidParameterError(f"epsilon must lie in [0, 1/2), got {eps}")
    n = ds.count
    return WeightedSet(base=ds, weights=np.full(n, 1.0 / n), epsilon=eps)


# ---------------------------------------------------------------------------
# CSV + sidecar-JSON serialization
# ---------------------------------------------------------------------------
#
# Format: first line is the header "x0,x1,...,x{d-1}[,inlier]"; each later
# line is one point, written with %.17g so float64 values round-trip
# bit-exactly. The optional "inlier" column holds 0/1. Distribution metadata
# lives in a sibling file "<name>.meta.json" with keys "true_mean" and
# "true_cov".

_INLIER_COL = "inlier"


def meta_path_for(path: str) -> str:
    root, ext = os.path.splitext(path)
    return (root if ext else path) + ".meta.json"


def save_dataset(ds: Dataset, path: str, format: str = "csv") -> None:
    """Write a dataset to CSV (plus a .meta.json sidecar when metadata exists)."""
    if format != "csv":
        raise InvalidParameterError(f"unsupported format {format!r}")
    cols = [f"x{i}" for i in range(ds.dim)]
    block = ds.points
    if ds.inlier_mask is not None:
        cols.append(_INLIER_COL)
        block = np.column_stack([block, ds.inlier_mask.astype(np.float64)])
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            for row in block:
                fh.write(",".join("%.17g" % x for x in row) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc

    meta = {}
    if ds.true_mean is not None:
        meta["true_mean"] = ds.true_mean.tolist()
    if ds.true_cov is not None:
        meta["true_cov"] = ds.true_cov.tolist()
    if meta:
        mpath = meta_path_for(path)
        try:
            with open(mpath, "w", newline="") as fh:
                json.dump(meta, fh, indent=2)
                fh.write("\n")
        except OSError as exc:
            raise DataIOError(f"cannot write {mpath}: {exc}") from exc


def _scan_for_bad_row(path: str, expected_arity: int) -> None:
    """Locate the first malformed CSV row and raise a line-numbered ParseError."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1:
                continue
            stripped = line.strip()
            if not stripped:
                raise ParseError("blank row", line=lineno)
            cells = stripped.split(",")
            if len(cells) != expected_arity:
                raise ParseError(
                    f"row has {len(cells)} cells, expected {expected_arity}",
                    line=lineno,
                )
            for cell in cells:
                try:
                    float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric cell {cell!r}", line=lineno) from None
    raise ParseError("malformed data rows", line=None)


def load_dataset(path: str, format: str = "csv") -> Dataset:
    """Load a dataset written by `save_dataset`.

    The header determines the dimension; a trailing "inlier" column (0/1)
    populates the mask. Metadata is read from the sibling .meta.json file
    when present.

    Raises:
        DataIOError: unreadable file.
        ParseError: wrong arity or non-numeric cell (with line number).
        EmptyDataError: no header or no data rows.
    """
    if format != "csv":
        raise InvalidParameterError(f"unsupported format {format!r}")
    try:
        with open(path) as fh:
            header = fh.readline()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    if not header.strip():
        raise EmptyDataError("file is empty", line=1)
    columns = [c.strip() for c in header.strip().split(",")]

    def _is_number(tok: str) -> bool:
        try:
            float(tok)
            return True
        except ValueError:
            return False

    if all(_is_number(c) for c in columns):
        raise ParseError("expected a header line, found numeric data", line=1)
    has_mask = columns[-1] == _INLIER_COL
    arity = len(columns)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # loadtxt warns on empty data
            raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc
    except ValueError:
        _scan_for_bad_row(path, arity)
        raise  # unreachable: the scan always raises
    if raw.size == 0:
        raise EmptyDataError("no data rows")
    if raw.shape[1] != arity:
        _scan_for_bad_row(path, arity)

    if has_mask:
        mask_col = raw[:, -1]
        if not np.all((mask_col == 0.0) | (mask_col == 1.0)):
            bad = int(np.nonzero((mask_col != 0.0) & (mask_col != 1.0))[0][0])
            raise ParseError("inlier column must be 0 or 1", line=bad + 2)
        points = raw[:, :-1]
        mask = mask_col.astype(bool)
    else:
        points = raw
        mask = None

    true_mean = None
    true_cov = None
    mpath = meta_path_for(path)
    if os.path.exists(mpath):
        try:
            with open(mpath) as fh:
                meta = json.load(fh)
        except OSError as exc:
            raise DataIOError(f"cannot read {mpath}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid metadata JSON: {exc}") from exc
        true_mean = meta.get("true_mean")
        true_cov = meta.get("true_cov")

    return Dataset(points=points, inlier_mask=mask, true_mean=true_mean, true_cov=true_cov)
