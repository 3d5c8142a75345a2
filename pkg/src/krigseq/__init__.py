"""Sequential kriging-based selection of test scenarios.

Learns an unknown response surface from expensive experiments with a
Gaussian-random-field model and picks each next test scenario by
maximizing the expected impact on a rare-event probability estimate.
"""

from .acquisition import (
    AcquisitionSample,
    CandidateScore,
    SAConfig,
    SAResult,
    acquisition_objective,
    gradient_estimate,
    information_gain,
    information_gain_batch,
    local_prediction_impact,
    sa_search,
)
from .campaign import (
    CampaignConfig,
    CampaignState,
    config_from_dict,
    initialize,
    initialize_with_responses,
    lhs_design,
    run,
    select_next,
    step,
    summary_dict,
)
from .errors import (
    DegenerateCandidateError,
    DimensionMismatchError,
    DuplicateDesignPointError,
    InvalidConfigurationError,
    KrigseqError,
    NoCandidateError,
    NumericalDegeneracyError,
    SimulationDivergenceError,
)
from .estimator import (
    ProbabilityEstimate,
    estimate_target,
    pointwise_exceedance,
    sigma_floor,
)
from .gp import (
    CandidateConditioner,
    DesignSet,
    KernelParams,
    PosteriorMoments,
    build_design,
    correlation,
    design_from_dict,
    design_to_dict,
    empty_design,
    extend,
    posterior,
    posterior_batch,
    posterior_with_candidate,
)
from .scenarios import (
    TOY_TRUTH,
    EgoControlParams,
    LaneChangeScenario,
    ScenarioDistribution,
    empirical,
    lane_change_env,
    lane_change_oracle,
    point_mass,
    sample_env,
    simulate_lane_change,
    standard_gaussian,
    toy_oracle,
)

__version__ = "0.1.0"
