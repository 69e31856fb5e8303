"""Surrogate-based decision uncertainty estimation and sensitivity analysis."""

from .decision import (
    BlackboxConstraint,
    DecisionSample,
    DensityGrid,
    FeasibleRegion,
    LinearConstraint,
    density_grid,
    optimize_posterior_mean,
    sample_decision_uncertainty,
    sample_decision_uncertainty_constrained,
    summarize,
)
from .exceptions import (
    DecuqError,
    DegenerateSampleError,
    DegenerateVarianceError,
    InfeasibleRegionError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .gp import (
    Dataset,
    FitConfig,
    FittedGp,
    PosteriorEvaluation,
    correlation_matrix,
    fit,
    load_model,
    matern52,
    mle_mean_variance,
    model_from_json,
    model_to_json,
    posterior,
    posterior_mean,
    profile_log_likelihood,
    save_model,
)
from .rng import SeededRng
from .sampling import LatinHypercubeDesign, lhs, mvn_sample, robust_cholesky
from .sensitivity import (
    Evaluator,
    InputDistribution,
    SobolResult,
    sobol_brute_force,
    sobol_indices,
)

__version__ = "0.1.0"
