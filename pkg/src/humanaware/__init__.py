"""Latent-attention arousal modeling and arousal-aware flight path planning.

The package fits a two-state hidden-attention model of physiological arousal
to robot fly-by time series by EM, compares it against the i.i.d.-Gaussian
least-squares baseline, and plans minimum-time Bernstein-polynomial flight
paths penalized by the predicted arousal, with convex-hull deconfliction.
"""

__version__ = "0.1.0"

from .bernstein import (
    BernsteinCurve,
    ConvexHull,
    LglRule,
    bernstein_eval,
    bernstein_to_interpolation,
    convex_hull,
    de_casteljau_split,
    derivative_curve,
    hull_clearance,
    interpolation_to_bernstein,
    lgl_quadrature,
    lgl_rule,
)
from .estimation import (
    EmConfig,
    EstimationError,
    FitReport,
    LrtResult,
    PosteriorTables,
    baseline_params,
    brute_force_likelihood,
    default_init,
    em_fit,
    forward_backward,
    gmm_responsibilities,
    likelihood_ratio_test,
    m_step,
    mse_fit,
    test_log_likelihood,
)
from .model import (
    ArousalModel,
    Dataset,
    FeatureVector,
    MixtureComponent,
    ModelParams,
    ObservationSequence,
    Standardization,
    basis_eval,
    emission_density,
    predict_arousal,
    validate_params,
)
from .planner import (
    Circle,
    ConstraintReport,
    PlanInfeasibleError,
    PlanningScenario,
    PlanResult,
    build_features,
    constraint_eval,
    plan,
    running_cost,
    sweep_ba,
    total_cost,
)
from .synth import (
    GroundTruth,
    ScenarioConfig,
    default_true_params,
    sample_observations,
    simulate_flyby,
    split_dataset,
)
