"""Euler characteristic curves of gridded random fields, Lipschitz-Killing
curvature estimation by Hermite projection, and expected-EC inference."""
from .grid import (DomainEC, FieldSample, FieldValidationError, GridField, domain_ec, export_csv,
                   field_from_bytes, field_to_bytes, flatten_index, load_field, save_field,
                   unflatten_index)
from .ec import (Connectivity, ECCurve, StepAverage, average_curves, binary_ec, ec_curve,
                 ec_curve_average, ec_delta_at, ec_oracle, ec_values, local_ec, resolve_connectivity)
from .hermite import (ECDensityBasis, ec_density, gauss_tail, hermite, hermite_table,
                      weighted_inner)
from .lkc import (LKCVector, bhpe, check_residuals, gmf_draw, hpe_fields, hpe_on_sample,
                  hpe_sample, hpe_single, lkc_regression, normalize_residuals, standardize,
                  substream)
from .eec import (CER_ALPHA, band_from_values, FWER_ALPHA, EECModel, NoRootError, ThresholdResult, default_grid,
                  eec_band, eec_cov, eec_derivative, eec_evaluate, nonparametric_band,
                  smoothed_ec, solve_threshold, threshold_variance)
from .sim import (IsotropicSpec, ScaleSpaceSpec, simulate_isotropic, simulate_scale_space,
                  true_lkc_isotropic, true_lkc_scale_space)
from .glm import DesignMatrix, GLMFit, fit_pointwise, glm_standardized_residuals, zscore_field
from .study import StudyConfig, estimate, run_study

__version__ = "0.1.0"
