"""Two-class preemptive-priority multiserver queue with class-1 loss.

Exact matrix-analytic solution of the quasi-birth-death formulation,
Erlang-loss stability analysis, and a cross-validating discrete-event
simulator with general service-time distributions.
"""

from .erlang_loss import (
    LossDistribution,
    StabilityReport,
    loss_distribution,
    no_loss_stability,
    stability,
)
from .measures import (
    PerformanceReport,
    marginal_phase,
    mean_terminations,
    mean_waiting,
    performance_report,
    queue_tail,
    throughput,
)
from .model import (
    InvalidParams,
    ServiceDistribution,
    State,
    SystemParams,
    distribution_from_spec,
    mean_preserving_erlang,
    validate,
)
from .des import Estimate, SimConfig, SimReport, run_scripted, simulate
from .qbd import (
    NotConverged,
    QbdBlocks,
    SingularBoundary,
    StationarySolution,
    Unstable,
    build_blocks,
    solve,
    solve_R,
    solve_boundary,
    solve_pi0,
    stationary_level,
)

__all__ = [
    "InvalidParams", "SystemParams", "State", "ServiceDistribution",
    "validate", "mean_preserving_erlang", "distribution_from_spec",
    "LossDistribution", "StabilityReport", "loss_distribution", "stability",
    "no_loss_stability",
    "QbdBlocks", "StationarySolution", "build_blocks", "solve", "solve_R",
    "solve_boundary", "solve_pi0", "stationary_level",
    "NotConverged", "Unstable", "SingularBoundary",
    "PerformanceReport", "mean_waiting", "mean_terminations", "throughput",
    "marginal_phase", "queue_tail", "performance_report",
    "SimConfig", "SimReport", "Estimate", "simulate", "run_scripted",
]

__version__ = "0.1.0"
