"""Rebalancing controllers.

Four policies are supported by the simulator:

* no control - vehicles only move to serve requests;
* static - state-blind Poisson streams of empty dispatches at rates chosen
  once by a flow-balance LP (:func:`static_rates`);
* time-driven - every ``trigger`` time units, top every region up to its
  fill level if the fleet allows it;
* event-driven - watch the aggregate shortfall below the fill levels after
  every event and dispatch as soon as it exceeds the integer ``trigger``.

The dynamic policies share one dispatch computation: regions register a
supply of excess vehicles or a demand for replacements relative to their
fill level, counting vehicles already en route toward a region, and a
min-cost flow routes empty vehicles at minimum expected driving time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow import FlowProblem, min_cost_flow
from .lp import LinearProgram, solve_lp
from .model import SystemConfig, SystemState

__all__ = [
    "ControlParams",
    "StaticRates",
    "availability",
    "supply_demand",
    "event_trigger",
    "rebalance_dispatch",
    "time_driven_tick",
    "static_rates",
]

BALANCE_TOL = 1e-9


@dataclass
class ControlParams:
    """Parameters of a threshold controller.

    ``fill_levels`` holds one target inventory per region, either a single
    vector applied to every interval or one row per interval.  ``trigger``
    is the dispatch period for the time-driven mode (positive real) or the
    aggregate-deficit threshold for the event-driven mode (integer in
    1..fleet size).
    """

    mode: str
    fill_levels: np.ndarray
    trigger: float

    def __post_init__(self) -> None:
        if self.mode not in ("time", "event"):
            raise ValueError("mode must be 'time' or 'event'")
        self.fill_levels = np.atleast_1d(np.asarray(self.fill_levels, dtype=np.int64))

    def levels_for_interval(self, k: int) -> np.ndarray:
        """Fill levels in force during interval ``k`` (single set broadcasts)."""
        if self.fill_levels.ndim == 1:
            return self.fill_levels
        return self.fill_levels[min(k, self.fill_levels.shape[0] - 1)]

    def validate(self, n_regions: int, fleet_size: int, n_intervals: int = 1) -> None:
        levels = self.fill_levels if self.fill_levels.ndim == 2 else self.fill_levels[None, :]
        if levels.shape[1] != n_regions:
            raise ValueError("fill_levels must have one entry per region")
        if self.fill_levels.ndim == 2 and levels.shape[0] != n_intervals:
            raise ValueError("per-interval fill_levels must have one row per interval")
        if np.any(levels < 0):
            raise ValueError("fill levels must be nonnegative")
        if np.any(levels.sum(axis=1) > fleet_size):
            raise ValueError("fill levels must not exceed the fleet size in total")
        if self.mode == "time":
            if not self.trigger > 0:
                raise ValueError("time-driven trigger must be a positive period")
        else:
            if not (1 <= self.trigger <= fleet_size and float(self.trigger).is_integer()):
                raise ValueError("event-driven trigger must be an integer in 1..fleet size")

    def as_tuple(self) -> tuple:
        """Flat (levels..., trigger) tuple; used for deterministic tie-breaks."""
        return tuple(int(v) for v in np.ravel(self.fill_levels)) + (self.trigger,)


@dataclass
class StaticRates:
    """Empty-dispatch rates of the state-blind static controller."""

    rates: np.ndarray

    def __post_init__(self) -> None:
        self.rates = np.asarray(self.rates, dtype=float)
        n = self.rates.shape[0]
        if self.rates.shape != (n, n):
            raise ValueError("rates must be square")
        if np.any(self.rates < 0):
            raise ValueError("rates must be nonnegative")
        if np.any(np.diag(self.rates) != 0):
            raise ValueError("intra-region empty dispatch rates are not allowed")

    def balance_residual(self, request_rates: np.ndarray) -> float:
        """Max absolute violation of per-region inflow = outflow."""
        total = request_rates + self.rates
        return float(np.max(np.abs(total.sum(axis=1) - total.sum(axis=0))))


def availability(state: SystemState) -> np.ndarray:
    """Vehicles usable by each region: idle there plus en route toward it."""
    inbound = state.trips_full.sum(axis=0) + state.trips_empty.sum(axis=0)
    return state.idle + inbound


def supply_demand(state: SystemState, fill_levels: np.ndarray) -> np.ndarray:
    """Per-region surplus (positive) or shortfall (negative) vs fill levels.

    The surplus is capped by the idle count: only physically present
    vehicles can be dispatched.
    """
    return np.minimum(availability(state) - fill_levels, state.idle)


def event_trigger(state: SystemState, params: ControlParams) -> bool:
    """Whether the event-driven controller fires in this state.

    True when the aggregate shortfall below the fill levels exceeds the
    trigger threshold and enough surplus exists to cover the whole
    shortfall.  Both conditions are re-evaluated from scratch at every
    query; there is no latching.
    """
    if params.mode != "event":
        raise ValueError("event_trigger applies to event-driven parameters")
    levels = params.levels_for_interval(state.interval)
    avail = availability(state)
    deficit = int(np.maximum(levels - avail, 0).sum())
    if deficit <= params.trigger:
        return False
    supply = int(np.maximum(np.minimum(avail - levels, state.idle), 0).sum())
    return supply >= deficit


def rebalance_dispatch(
    state: SystemState, fill_levels: np.ndarray, travel_rates: np.ndarray
) -> np.ndarray:
    """Dispatch matrix restoring every deficit region up to its fill level.

    Requires total surplus >= total shortfall (callers gate on it).  Deficit
    regions are filled exactly to their level, surplus regions never drop
    below theirs, and no region dispatches more vehicles than it has idle.
    """
    net = supply_demand(state, fill_levels)
    demand = int(np.maximum(-net, 0).sum())
    if demand == 0:
        return np.zeros_like(state.trips_empty)
    if int(np.maximum(net, 0).sum()) < demand:
        raise ValueError("insufficient surplus for a full dispatch")
    problem = FlowProblem(balance=net, costs=1.0 / travel_rates, out_caps=state.idle)
    return min_cost_flow(problem)


def time_driven_tick(
    state: SystemState, params: ControlParams, travel_rates: np.ndarray
) -> np.ndarray:
    """Dispatch decision at a timeout of the time-driven controller.

    When the surplus cannot cover every shortfall, demands are capped to the
    available surplus, allocated to regions in decreasing-shortfall order
    (ties to the lower region index), and the reduced instance is solved;
    partial help beats none and the rule is deterministic.
    """
    if params.mode != "time":
        raise ValueError("time_driven_tick applies to time-driven parameters")
    levels = params.levels_for_interval(state.interval)
    net = supply_demand(state, levels)
    supply = int(np.maximum(net, 0).sum())
    demand = int(np.maximum(-net, 0).sum())
    if demand == 0 or supply == 0:
        return np.zeros_like(state.trips_empty)
    if supply < demand:
        net = _cap_demands(net, supply)
    problem = FlowProblem(balance=net, costs=1.0 / travel_rates, out_caps=state.idle)
    return min_cost_flow(problem)


def _cap_demands(net: np.ndarray, supply: int) -> np.ndarray:
    """Cap total shortfall at ``supply``, biggest shortfalls served first."""
    capped = net.copy()
    order = sorted(np.flatnonzero(net < 0), key=lambda i: (net[i], i))
    remaining = supply
    for i in order:
        take = min(remaining, int(-net[i]))
        capped[i] = -take
        remaining -= take
    return capped


def static_rates(config: SystemConfig) -> StaticRates:
    """Optimal state-blind empty-dispatch rates for a time-invariant config.

    Minimizes total expected empty driving time subject to balancing each
    region's vehicle inflow and outflow.  Always feasible (mirroring every
    request stream backwards balances the network).
    """
    if not config.time_invariant:
        raise ValueError("static rates require a single-interval configuration")
    lam = config.intervals[0].request_rates
    mu = config.intervals[0].travel_rates
    n = config.n_regions
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    idx = {arc: k for k, arc in enumerate(arcs)}
    objective = np.array([1.0 / mu[i, j] for i, j in arcs])
    lhs = np.zeros((n, len(arcs)))
    imbalance = lam.sum(axis=1) - lam.sum(axis=0)
    for (i, j), k in idx.items():
        lhs[i, k] += 1.0
        lhs[j, k] -= 1.0
    solution = solve_lp(
        LinearProgram(
            objective=objective,
            lhs=lhs,
            relations=["="] * n,
            rhs=-imbalance,
        )
    )
    if not solution.optimal:
        raise RuntimeError(f"static rate LP unexpectedly {solution.status}")
    rates = np.zeros((n, n))
    for (i, j), k in idx.items():
        rates[i, j] = max(solution.x[k], 0.0)
    rates[np.abs(rates) < BALANCE_TOL] = 0.0
    result = StaticRates(rates=rates)
    residual = result.balance_residual(lam)
    if residual > 1e-6:
        raise RuntimeError(f"static rates violate flow balance by {residual}")
    return result
