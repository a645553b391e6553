"""Covariance cleaning by optimal train-test splitting.

Monte Carlo and closed-form tools for rotational invariant covariance
estimators: oracle, holdout, k-fold cross-validation, linear shrinkage,
and observable nonlinear shrinkage, with a seeded experiment harness and
a CLI for reproducible error curves, scatter comparisons, and cleaning of
user data matrices.
"""

from .ensembles import (
    EnsembleSpec,
    SeededRng,
    estimate_p_from_sample,
    sample_covariance,
    sample_gaussian_data,
    sample_white_inverse_wishart,
    spec_from_np,
)
from .estimators import (
    SplitPlan,
    default_eta,
    holdout_eigenvalues,
    holdout_estimator,
    holdout_rie_estimator,
    kfold_cv_eigenvalues,
    kfold_cv_estimator,
    kfold_cv_rie_estimator,
    ledoit_peche_eigenvalues,
    linear_shrinkage,
    make_split,
    oracle_estimator,
)
from .harness import (
    ErrorSummary,
    ExperimentConfig,
    ScatterConfig,
    ScatterRow,
    SummaryRow,
    WickConfig,
    WickReport,
    run_experiment,
    run_replication,
    run_scatter,
    wick_identity_experiment,
)
from .linalg import (
    EigenSolverError,
    Spectrum,
    diag_quadratic,
    eigh_ascending,
    frobenius_error,
    normalized_trace,
    recompose,
    symmetrize,
)
from .theory import (
    LamDiagnostic,
    RegimeFlags,
    TheoryPoint,
    holdout_error_closed_form,
    k_opt_asymptotic,
    k_opt_exact,
    lam_split_diagnostic,
    oracle_error,
    sample_error,
    theory_point,
    variance_decomposition_error,
    wick_identity_rhs,
)

__version__ = "0.1.0"

__all__ = [
    "EnsembleSpec",
    "SeededRng",
    "estimate_p_from_sample",
    "sample_covariance",
    "sample_gaussian_data",
    "sample_white_inverse_wishart",
    "spec_from_np",
    "SplitPlan",
    "default_eta",
    "holdout_eigenvalues",
    "holdout_estimator",
    "holdout_rie_estimator",
    "kfold_cv_eigenvalues",
    "kfold_cv_estimator",
    "kfold_cv_rie_estimator",
    "ledoit_peche_eigenvalues",
    "linear_shrinkage",
    "make_split",
    "oracle_estimator",
    "ErrorSummary",
    "ExperimentConfig",
    "ScatterConfig",
    "ScatterRow",
    "SummaryRow",
    "WickConfig",
    "WickReport",
    "run_experiment",
    "run_replication",
    "run_scatter",
    "wick_identity_experiment",
    "EigenSolverError",
    "Spectrum",
    "diag_quadratic",
    "eigh_ascending",
    "frobenius_error",
    "normalized_trace",
    "recompose",
    "symmetrize",
    "LamDiagnostic",
    "RegimeFlags",
    "TheoryPoint",
    "holdout_error_closed_form",
    "k_opt_asymptotic",
    "k_opt_exact",
    "lam_split_diagnostic",
    "oracle_error",
    "sample_error",
    "theory_point",
    "variance_decomposition_error",
    "wick_identity_rhs",
    "__version__",
]
