"""Active subspace detection with kriging response surfaces.

The toolkit estimates the dominant directions of a multivariate function
from sampled gradients, builds designs on the reduced domain those
directions induce, trains an eigenvalue-tied kriging surface on
conditional-average training data, and evaluates the theoretical error
bounds next to measured errors.  ``activekrig.cli`` exposes the same
flow as a command line tool; :mod:`activekrig.pipeline` is the
programmatic driver.
"""

from .domain import (
    InputDomain,
    ReducedDomain,
    effective_sample_size,
    lift_point,
    sample_conditional_z,
    tensor_design,
    zonotope_design,
    zonotope_vertices,
)
from .errors import (
    CoefficientOverflowError,
    ConditioningError,
    ConfigError,
    DegenerateDirectionError,
    DegenerateSubspaceError,
    InfeasiblePointError,
    NonPoisedDesignError,
    NumericalError,
    UnsupportedDimensionError,
)
from .kriging import (
    KrigingHyperparameters,
    KrigingModel,
    alpha_bracket,
    fit,
    fit_isotropic,
    hyperparameters_from_eigenvalues,
    load_model_json,
    predict,
    save_model_json,
)
from .models import (
    EllipticModel,
    ModelFunction,
    build_model,
    kl_decompose,
    make_quadratic_form,
    make_ridge,
)
from .pipeline import (
    ErrorReport,
    PipelineConfig,
    PipelineSeeds,
    config_from_dict,
    config_to_dict,
    execute_pipeline,
    run_comparison,
    run_full_space_baseline,
    run_local_sensitivity_baseline,
    run_perturbation_study,
    run_pipeline,
)
from .subspace import (
    ActiveSubspace,
    BoundInputs,
    GradientSampleSet,
    bound_conditional,
    bound_monte_carlo,
    bound_perturbed,
    bound_response_surface,
    estimate_subspace,
    local_sensitivity_ranking,
    perturb_subspace,
    subspace_distance,
)
from .surrogate import (
    McSurrogateConfig,
    evaluate_Fhat,
    evaluate_Fhat_batch,
    evaluate_Ghat,
    evaluate_Ghat_batch,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSubspace",
    "BoundInputs",
    "CoefficientOverflowError",
    "ConditioningError",
    "ConfigError",
    "DegenerateDirectionError",
    "DegenerateSubspaceError",
    "EllipticModel",
    "ErrorReport",
    "GradientSampleSet",
    "InfeasiblePointError",
    "InputDomain",
    "KrigingHyperparameters",
    "KrigingModel",
    "McSurrogateConfig",
    "ModelFunction",
    "NonPoisedDesignError",
    "NumericalError",
    "PipelineConfig",
    "PipelineSeeds",
    "ReducedDomain",
    "UnsupportedDimensionError",
    "alpha_bracket",
    "bound_conditional",
    "bound_monte_carlo",
    "bound_perturbed",
    "bound_response_surface",
    "build_model",
    "config_from_dict",
    "config_to_dict",
    "effective_sample_size",
    "estimate_subspace",
    "evaluate_Fhat",
    "evaluate_Fhat_batch",
    "evaluate_Ghat",
    "evaluate_Ghat_batch",
    "execute_pipeline",
    "fit",
    "fit_isotropic",
    "hyperparameters_from_eigenvalues",
    "kl_decompose",
    "lift_point",
    "load_model_json",
    "local_sensitivity_ranking",
    "make_quadratic_form",
    "make_ridge",
    "perturb_subspace",
    "predict",
    "run_comparison",
    "run_full_space_baseline",
    "run_local_sensitivity_baseline",
    "run_perturbation_study",
    "run_pipeline",
    "sample_conditional_z",
    "save_model_json",
    "subspace_distance",
    "tensor_design",
    "zonotope_design",
    "zonotope_vertices",
]
