"""Graph-guided adaptive Bayesian shrinkage regression (EMSH / EMSHS).

Sparse linear regression where each coefficient carries its own L1 penalty;
the log-penalties are learned from the data, shrunk toward a tunable sparsity
location, and smoothed along the edges of a known predictor graph.  Fitting
is an EM loop whose M-steps are a weighted lasso, a closed-form variance
update, and a few damped Newton steps, so it scales to very large numbers of
predictors.
"""

from .data import Dataset, standardize
from .em import (
    EmState,
    FitResult,
    Hyperparameters,
    e_step,
    fit,
    fixed_point_residual,
    initialize,
    log_marginal_posterior,
    m_step_alpha,
    m_step_sigma,
    predict,
    q_objective,
)
from .estimator import EmshsRegressor
from .evaluate import (
    BenchmarkSummary,
    Metrics,
    TuningResult,
    compute_metrics,
    cross_validate,
    run_benchmark,
    tune_over_mu,
)
from .exceptions import (
    ConfigError,
    DataError,
    EmshsError,
    GraphInputError,
    NonConvergenceError,
    QuadratureError,
)
from .graph import (
    SparseGraph,
    load_edge_list,
    omega_apply,
    omega_dense,
    omega_diagonal,
    omega_quadratic_form,
)
from .priors import (
    PriorConfig,
    marginal_beta_density_mc,
    pairwise_alpha_density,
    properness_bound_check,
)
from .simulate import (
    ScenarioSpec,
    SimulatedSplits,
    SyntheticTruth,
    build_covariance,
    derive_working_graph,
    generate_pathway_graph,
    generate_truth,
    sample_dataset,
)
from .wlasso import WLassoSolution, check_kkt, solve_weighted_lasso

__version__ = "0.1.0"

__all__ = [
    "BenchmarkSummary",
    "ConfigError",
    "DataError",
    "Dataset",
    "EmshsError",
    "EmshsRegressor",
    "EmState",
    "FitResult",
    "GraphInputError",
    "Hyperparameters",
    "Metrics",
    "NonConvergenceError",
    "PriorConfig",
    "QuadratureError",
    "ScenarioSpec",
    "SimulatedSplits",
    "SparseGraph",
    "SyntheticTruth",
    "TuningResult",
    "WLassoSolution",
    "build_covariance",
    "check_kkt",
    "compute_metrics",
    "cross_validate",
    "derive_working_graph",
    "e_step",
    "fit",
    "fixed_point_residual",
    "generate_pathway_graph",
    "generate_truth",
    "initialize",
    "load_edge_list",
    "log_marginal_posterior",
    "m_step_alpha",
    "m_step_sigma",
    "marginal_beta_density_mc",
    "omega_apply",
    "omega_dense",
    "omega_diagonal",
    "omega_quadratic_form",
    "pairwise_alpha_density",
    "predict",
    "properness_bound_check",
    "q_objective",
    "run_benchmark",
    "sample_dataset",
    "solve_weighted_lasso",
    "standardize",
    "tune_over_mu",
]
