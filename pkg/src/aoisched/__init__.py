"""Whittle-index scheduling for truncated age of information.

Library and CLI for analyzing and simulating the scheduling of n users
over k channel classes under a per-slot budget: closed-form Whittle
indices, the relaxed-problem optimum, fluid-limit stability analysis,
and a seeded Monte Carlo simulator.
"""
from .errors import (
    ComputationError,
    ConvergenceError,
    DegenerateThresholdError,
    DuplicateKeyError,
    FractionError,
    InfeasibleError,
    IntegralityError,
    ParseError,
    RangeError,
    SchedulingError,
    ShapeError,
    SingularSystemError,
    SizeError,
    ValidationError,
)
from .model import (
    AgeState,
    ClassSpec,
    NetworkConfig,
    OccupancyVector,
    config_from_dict,
    empirical_occupancy,
    load_config,
    validate_config,
)
from .index import (
    CostPair,
    ThresholdPolicy1D,
    age_cost,
    cost_pair,
    index_gap,
    optimal_thresholds,
    sched_cost,
    stationary_distribution,
    whittle_index,
    whittle_index_table,
)
from .oracle import RviResult, joint_mdp_optimal, rvi_one_dim, stationary_by_balance
from .relaxed import RelaxedSolution, rp_fixed_point, scheduled_fraction, solve_rp
from .fluid import (
    FluidTrajectory,
    LinearRegionSystem,
    assemble_linear,
    fluid_step,
    fluid_trajectory,
    in_region,
    reduce_occupancy,
    spectral_radius,
    spectral_report,
)
from .sim import (
    PolicyKind,
    SimRecord,
    fluid_deviation,
    greedy_policy,
    hitting_time,
    make_initial_ages,
    rp_policy,
    simulate,
    step,
    uniform_policy,
    whittle_policy,
    whittle_schedule,
)
from .cli import ExperimentSpec, emit_plot_data, main, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AgeState",
    "ClassSpec",
    "ComputationError",
    "ConvergenceError",
    "CostPair",
    "DegenerateThresholdError",
    "DuplicateKeyError",
    "ExperimentSpec",
    "FluidTrajectory",
    "FractionError",
    "InfeasibleError",
    "IntegralityError",
    "LinearRegionSystem",
    "NetworkConfig",
    "OccupancyVector",
    "ParseError",
    "PolicyKind",
    "RangeError",
    "RelaxedSolution",
    "RviResult",
    "SchedulingError",
    "ShapeError",
    "SimRecord",
    "SingularSystemError",
    "SizeError",
    "ThresholdPolicy1D",
    "ValidationError",
    "age_cost",
    "assemble_linear",
    "config_from_dict",
    "cost_pair",
    "emit_plot_data",
    "empirical_occupancy",
    "fluid_deviation",
    "fluid_step",
    "fluid_trajectory",
    "greedy_policy",
    "hitting_time",
    "in_region",
    "index_gap",
    "joint_mdp_optimal",
    "load_config",
    "main",
    "make_initial_ages",
    "optimal_thresholds",
    "reduce_occupancy",
    "rp_fixed_point",
    "rp_policy",
    "run_experiment",
    "rvi_one_dim",
    "sched_cost",
    "scheduled_fraction",
    "simulate",
    "solve_rp",
    "spectral_radius",
    "spectral_report",
    "stationary_by_balance",
    "stationary_distribution",
    "step",
    "uniform_policy",
    "validate_config",
    "whittle_index",
    "whittle_index_table",
    "whittle_policy",
    "whittle_schedule",
]
