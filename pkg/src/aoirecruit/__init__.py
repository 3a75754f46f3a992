"""Optimal age-aware recruitment of heterogeneous crowdsourcing vehicles."""
from .evaluate import (
    EvaluationReport,
    StationaryDistribution,
    brute_force_optimal,
    dynamic_pricing_surrogate,
    exact_average_cost,
    stationary_distribution,
    zero_wait_cost_closed_form,
)
from .model import (
    Action,
    PolicyStructure,
    Scenario,
    ThresholdBounds,
    ThresholdPolicy,
    VehicleClass,
    classify_structure,
    cost_effectiveness,
    expected_recruit_cost,
    marginal_cost_effectiveness,
    reduced_feasible_set,
    stage_cost,
    success_prob,
    threshold_bounds,
    validate_scenario,
    zero_wait_policy,
)
from .sim import SimConfig, SimStats, simulate
from .solver import (
    SolveResult,
    SolverConfig,
    TruncatedMdp,
    brvi_solve,
    build_truncated_mdp,
    extract_thresholds,
    rvi_solve,
    solve,
    structural_rvi_solve,
)

__version__ = "0.1.0"
