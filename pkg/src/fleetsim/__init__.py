"""Fleet rebalancing for mobility-on-demand systems.

Event-driven simulation of a closed vehicle network, threshold-based
rebalancing controllers, concurrent estimation of many parameter settings
from one sample path, parameter search, and exact small-system and
lower-bound references.
"""

from .clock import ClockStream, split_seed
from .config import load_config, six_region_benchmark
from .control import ControlParams, StaticRates, static_rates
from .engine import (
    EventTrace,
    RateTable,
    concurrent_estimate,
    fictitious_bounds,
    run_nominal,
    sc_select_event,
    variant_select_event,
)
from .exact import dp_small_system, lower_bound, optimal_rate_policy, state_space_size
from .flow import FlowProblem, min_cost_flow
from .lp import LinearProgram, solve_lp
from .model import (
    Event,
    EventKind,
    IntervalParams,
    PathStats,
    SystemConfig,
    SystemState,
    accumulate_objective,
    apply_event,
    initial_state,
)
from .tuner import SearchBounds, SearchSchedule, greedy_step, random_search

__version__ = "0.1.0"

__all__ = [
    "ClockStream",
    "ControlParams",
    "Event",
    "EventKind",
    "EventTrace",
    "FlowProblem",
    "IntervalParams",
    "LinearProgram",
    "PathStats",
    "RateTable",
    "SearchBounds",
    "SearchSchedule",
    "StaticRates",
    "SystemConfig",
    "SystemState",
    "accumulate_objective",
    "apply_event",
    "concurrent_estimate",
    "dp_small_system",
    "fictitious_bounds",
    "greedy_step",
    "initial_state",
    "load_config",
    "lower_bound",
    "min_cost_flow",
    "optimal_rate_policy",
    "random_search",
    "run_nominal",
    "sc_select_event",
    "six_region_benchmark",
    "solve_lp",
    "split_seed",
    "state_space_size",
    "static_rates",
    "variant_select_event",
]
