"""PLS-family estimators with finite-sample prediction-loss bounds.

The package covers the one-component and soft-threshold (sparse) partial
least squares estimators, evaluators for every term of their non-asymptotic
prediction bounds, and a deterministic Monte Carlo harness that audits the
stated coverage levels.
"""

from .bounds import (
    BOUND_TAGS,
    EVENT_NAMES,
    BoundReport,
    EventThresholds,
    LambdaQuantities,
    PopulationContext,
    bias_term,
    bound_alt,
    bound_for,
    bound_sparse,
    bound_sparse_re,
    bound_thresholded,
    dense_proof_constant,
    deviation_terms,
    event_thresholds,
    lambda_quantities,
    population_context,
    quad_form_deviation_thresholds,
    replicate_event_flags,
    restricted_eig_surrogate,
    signal_condition_holds,
    sparse_deviation_terms,
    sparse_proof_constant,
)
from .errors import ConfigError, ConvergenceError, DatasetError, InvalidInputError
from .linalg import gram, min_eig_on_support, project_residual, spectral_radius, sym_sqrt, trace
from .pls import KrylovBasis, PlsFit, fit_pls, krylov_basis, predict
from .simulate import (
    BETA_KINDS,
    DESIGN_KINDS,
    ESTIMATORS,
    THEOREM_TAGS,
    BetaSpec,
    CalibrationResult,
    DesignSpec,
    ReplicateRecord,
    SimConfig,
    SimSummary,
    build_design,
    build_scenario,
    calibrate_constant,
    empirical_sigma_moments,
    resolve_beta,
    run_replicates,
    sample_response,
    validate_config,
)
from .single import (
    SingleFitDiagnostics,
    ThresholdConstants,
    single_component_estimator,
    tail_factor,
    threshold_constants,
    threshold_scalars,
    thresholded_estimator,
)
from .sparse import (
    RATIO_BOUND_SPARSE,
    SIGNAL_ASSEMBLY_CONSTANT,
    SparseConstants,
    SparseFit,
    alt_estimator,
    mu_level,
    signal_factor,
    soft_threshold,
    sparse_constants,
    spls_estimator,
    spls_weight,
    support_sets,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
