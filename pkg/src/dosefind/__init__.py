"""Sequential dose-finding: transition rules, estimation, and simulation."""

from .core import (
    CohortRecord,
    DoseGrid,
    NonMonotoneError,
    OutOfRangeError,
    Scenario,
    ScenarioError,
    ThresholdStream,
    TieForMtdError,
    TrialState,
    empty_state,
    toxicity_outcome,
    validate_scenario,
)
from .crm import (
    ChevretModel,
    LogNormalPrior,
    PosteriorSummary,
    PowerModel,
    QuadratureError,
    Skeleton,
    chevret_backcalc,
    crm_mtd_estimate,
    crm_next,
    posterior_theta,
    power_curve,
)
from .designs import (
    CcdDesign,
    CcdRule,
    CrmDesign,
    DesignAction,
    GroupUdRule,
    GroupUpDownDesign,
    HybridDesign,
    HybridRule,
    KInARowDesign,
    RadDesign,
    ThreePlusThreeDesign,
    ccd_next,
    group_ud_next,
    hybrid_next,
    k_in_a_row_next,
    rad_next,
    three_plus_three_step,
)
from .isotonic import CirResult, cir, cir_mtd_select
from .scenarios import (
    GeneratorStarvedError,
    InfeasibleScenarioError,
    ParametricFamily,
    SceneConfig,
    calibrate_fixed_scenario,
    random_scenario,
    standard_scenarios,
    stratified_ensemble,
)
from .simulate import (
    EnsembleReport,
    RunMetrics,
    Trajectory,
    compute_metrics,
    perfect_threshold_set,
    run_ensemble,
    run_permutation_ensemble,
    run_trial,
    summarize_ensemble,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
