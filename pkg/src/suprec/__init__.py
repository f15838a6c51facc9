"""Support recovery of sparse signals from low-dimensional random sketches."""

from .datagen import (
    Ensemble, Instance, ProblemConfig, Prior, SupportSet, VarianceMode, VarianceVector, generate,
)
from .errors import (
    BudgetExceededError, DegenerateInputError, InvalidConfigError, InvalidInputError, SuprecError,
)
from .estimator import (
    default_threshold, expected_proxy, proxy_variance, threshold_support, topk_support,
)
from .harness import (
    Normalization, SweepResult, SweepSpec, crossing_point, normalize_axis, run_sweep, run_trial,
    wilson_interval,
)
from .lowerbound import exact_gaussian_kl, kl_chain, sample_bounds, wishart_min_eig_inv4

__version__ = "0.1.0"
