"""Variable selection for sparse GLMs via one-step model scores.

The pieces, bottom to top: supports as packed bit vectors; GLM families
and restricted likelihoods; an elastic-net initial estimator; model
scores from a single Newton step with exact comparators; a random-scan
Gibbs sampler over supports plus an exact data-augmentation chain; lagged
couplings for mixing-time upper bounds; exhaustive finite-state chain
verification; and a simulation/benchmark harness with a CLI.
"""

from .chain_analysis import (
    BoundReport,
    FiniteChain,
    build_transition_matrix,
    canonical_path_bound,
    conductance,
    spectral_gap,
    tv_curve,
    verify_bounds,
)
from .config import DEFAULT_CONFIG, load_config, validate_config
from .coupling import (
    MeetingRecord,
    coupled_gibbs_step,
    curve_to_csv,
    init_fixed,
    init_null,
    init_posterior_draw,
    init_truth_plus_fp,
    l_lag_meeting_time,
    load_records,
    mixing_time_estimate,
    records_to_json,
    sample_meeting_times,
    tv_bound_curve,
)
from .datasets import load_dataset, load_matrix, save_dataset
from .elastic_net import (
    NetConfig,
    NetResult,
    cv_select,
    fit_elastic_net,
    lambda_grid,
    lambda_max,
    support_of,
)
from .families import (
    GAUSSIAN,
    LOGISTIC,
    POISSON,
    Dataset,
    GlmFamily,
    LinkOverflowError,
    family_from_tag,
    link_eval,
    log_lik,
    remainder_bound_check,
    restricted_grad,
    restricted_hess,
    restricted_objective,
    self_concordance_check,
)
from .experiment import ExperimentReport, run_experiment
from .metrics import f1_score, median_model, modal_model, predict, rmse
from .posterior import (
    ConsistencyDiagnostic,
    FactorizationError,
    ModelScore,
    OlapModel,
    cond_prob,
    consistency_diagnostic,
    enumerate_posterior,
    exact_gaussian_log_marginal,
    full_laplace_log_score,
    mle_restricted,
    olap_log_score,
    one_step,
)
from .samplers import (
    ChainState,
    DaConfig,
    Trace,
    da_step,
    gibbs_step,
    inclusion_probs,
    run_chain,
    run_da_chain,
)
from .simulate import SimConfig, design_matrix, draw_response, simulate
from .support import Support, embed, extract, flip, is_subset, meet

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "ChainState", "ConsistencyDiagnostic", "DaConfig",
    "Dataset", "DEFAULT_CONFIG", "ExperimentReport", "FactorizationError",
    "FiniteChain", "GAUSSIAN", "GlmFamily", "LinkOverflowError", "LOGISTIC",
    "MeetingRecord", "ModelScore", "NetConfig", "NetResult", "OlapModel",
    "POISSON", "SimConfig", "Support", "Trace",
    "build_transition_matrix", "canonical_path_bound", "cond_prob",
    "conductance", "consistency_diagnostic", "coupled_gibbs_step",
    "curve_to_csv", "cv_select", "da_step", "design_matrix",
    "draw_response", "embed",
    "enumerate_posterior", "exact_gaussian_log_marginal", "extract",
    "f1_score", "family_from_tag", "fit_elastic_net", "flip",
    "full_laplace_log_score", "gibbs_step", "inclusion_probs", "init_fixed",
    "init_null", "init_posterior_draw", "init_truth_plus_fp", "is_subset",
    "l_lag_meeting_time", "lambda_grid", "lambda_max", "link_eval",
    "load_config", "load_dataset", "load_matrix", "load_records", "log_lik",
    "median_model", "meet", "mixing_time_estimate", "mle_restricted",
    "modal_model", "olap_log_score", "one_step", "predict",
    "records_to_json", "remainder_bound_check",
    "restricted_grad", "restricted_hess", "restricted_objective", "rmse",
    "run_chain", "run_da_chain", "run_experiment", "sample_meeting_times",
    "save_dataset", "self_concordance_check", "simulate", "spectral_gap",
    "support_of", "tv_bound_curve", "tv_curve", "validate_config",
    "verify_bounds",
]
