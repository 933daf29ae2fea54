"""Outlier-robust high-dimensional estimation via spectral filtering.

Recover means, covariances, and regression coefficients from
adversarially contaminated samples with error independent of the
dimension, plus the contamination simulators and classical baselines
needed to benchmark them.
"""

from .baselines import (
    coordinate_wise_median,
    geometric_median,
    prune_extremes,
    sample_mean,
    trimmed_mean_1d,
)
from .bench import ErrorRecord, SweepConfig, evaluate_cov, evaluate_mean, run_sweep
from .contamination import (
    CleanSpec,
    ContaminationSpec,
    corrupt,
    default_direction,
    generate_clean,
)
from .covariance import (
    CovarianceConfig,
    CovarianceEstimate,
    flatten_second_moments,
    mahalanobis_error,
    pair_difference_centering,
    robust_covariance,
    robust_gaussian_fit,
)
from .dataset import Dataset, WeightedSet, load_dataset, save_dataset, uniform_weights
from .errors import (
    ConvergenceError,
    DataIOError,
    DegenerateDataError,
    EmptyDataError,
    FilterPreconditionError,
    InvalidParameterError,
    NoThresholdError,
    ParseError,
    RobustStatsError,
)
from .filters import (
    BasicFilterResult,
    FilterState,
    LinearFunctional,
    RobustMeanConfig,
    RobustMeanResult,
    ScoreFunction,
    apply_removal,
    basic_filter_step,
    randomized_filter,
    robust_mean,
    separation_oracle,
    top_eigen,
    universal_filter_scores,
    weighted_covariance,
)
from .regression import (
    OptConfig,
    RegressionData,
    RegressionResult,
    corrupt_regression,
    gradient_samples,
    load_regression,
    make_regression,
    robust_gd_regression,
    robust_gradient,
    save_regression,
    sever_loop,
)
from .stability import (
    CertificateBound,
    StabilityParams,
    StabilityReport,
    certificate_bound,
    directional_stability,
    estimate_stability,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
