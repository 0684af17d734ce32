"""Semi-supervised recovery of piecewise-constant graph signals by TV minimization."""

from .graph import (
    EmpiricalGraph,
    Partition,
    TrainingSet,
    boundary_edges,
    cluster_boundary,
    incidence_apply,
    incidence_transpose_apply,
    piecewise_constant_signal,
    tv_norm,
)
from .solver import ScalingFactors, SolverState, SolverTrace, certificate_gap, pd_iterate, solve_tvmin
from .mp import mp_round, mp_run
from .flow import (
    build_augmented_subgraph,
    check_flow_feasible,
    cut_condition_check,
    divergence,
    dual_objective,
    dual_to_flow,
    resolving_check_exact,
    resolving_check_maxflow,
    sbm_condition,
    unsaturated_constancy_check,
)
from .maxflow import FlowProblem, max_flow
from .baselines import NLassoOptions, solve_lp, solve_nlasso

__version__ = "0.1.0"

__all__ = [
    "EmpiricalGraph",
    "Partition",
    "TrainingSet",
    "boundary_edges",
    "cluster_boundary",
    "incidence_apply",
    "incidence_transpose_apply",
    "piecewise_constant_signal",
    "tv_norm",
    "ScalingFactors",
    "SolverState",
    "SolverTrace",
    "certificate_gap",
    "pd_iterate",
    "solve_tvmin",
    "mp_round",
    "mp_run",
    "build_augmented_subgraph",
    "check_flow_feasible",
    "cut_condition_check",
    "divergence",
    "dual_objective",
    "dual_to_flow",
    "resolving_check_exact",
    "resolving_check_maxflow",
    "sbm_condition",
    "unsaturated_constancy_check",
    "FlowProblem",
    "max_flow",
    "NLassoOptions",
    "solve_lp",
    "solve_nlasso",
]
