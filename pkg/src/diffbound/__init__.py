"""Differential-effect bounds for ATE and CATE with two-step bootstrap inference."""
__version__ = "0.1.0"

from .ate import (BoundsEstimate, Direction, Estimator2, aipw_estimate, ate_bounds, dim_estimate,
                  ipw_estimate, variance_dim, variance_ipw)
from .cate import (CateEstimate, CateKernels, DensityEstimates, KernelSpec, cate_bounds,
                   cate_variances, fit_cate_kernels, kde, kernel_eval, mu1_at, mu2_at, nw_regress,
                   select_bandwidth_cv)
from .data import CellCounts, ColumnMap, Dataset, ValidationReport, cell_counts, load_csv, validate, write_csv
from .errors import (DataError, DiffboundError, EstimationError, FitError, InferenceError,
                     KernelMassError, SeparationError)
from .inference import (BootstrapDraws, ConfidenceRegion, EstimatorConfig, bootstrap_estimates,
                        confidence_region, two_step_test)
from .irt import HOracleSpec, IrtFit, fit_2pl, h_oracle, item_prob, joint_prob, monotonicity_check
from .propensity import (OutcomeModel, PropensityModel, check_positivity, fit_logistic,
                         fit_outcome_regression, predict)

__all__ = [name for name in dir() if not name.startswith("_")]
