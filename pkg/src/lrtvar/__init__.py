"""Time-varying linear (autoregressive) models with a low-rank tensor parameterization.

Fit a stack of per-window system matrices to a multivariate time series,
with the stack represented by three small factor matrices (left spatial,
right spatial, temporal modes) and an optional temporal-smoothness penalty
that selects switching (total variation) or slowly drifting (spline)
dynamics.
"""

__version__ = "0.1.0"

from .cp_model import CpFactors, NormalizedCp, export_factors
from .errors import (
    DegenerateDataError,
    DegenerateProjectionError,
    DegenerateWindowError,
    DimensionMismatchError,
    LrtvarError,
    NonFiniteError,
    NonPositiveEtaError,
    SeriesTooShortError,
    ShapeMismatchError,
    TensorTooLargeError,
    ZeroVarianceError,
)
from .evaluation import (
    WindowedEstimate,
    cluster_temporal_modes,
    estimate_rmse,
    independent_fit,
    model_estimate,
    operator_norm_error,
)
from .regularizers import (
    Regularizer,
    apply_diff,
    apply_diff_transpose,
    spline_penalty,
    tikhonov_penalty,
    tv_penalty,
    tv_prox_1d,
)
from .solver import FitReport, Hyperparams, WarmRestart, cost, fit, initialize, loss, rmse
from .synthetic import (
    GroundTruth,
    gp_covariance,
    make_rank2_rotation,
    sample_gp_angle,
    simulate_smooth,
    simulate_switching,
)
from .windowing import (
    SnapshotPair,
    Standardization,
    TimeSeries,
    build_snapshots,
    read_series_csv,
    standardize,
    write_series_csv,
)
