"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way, sharing as
little code as possible with the package internals it checks: exhaustive
enumeration for the flow solver and the dispatch program, a pure-Python
uniformized simulator for the concurrent-estimation engine, and a
trace-replay harness driving the domain-model transition function.
"""

from __future__ import annotations

import itertools
from math import inf

import numpy as np

from fleetsim.clock import ClockStream
from fleetsim.control import ControlParams, event_trigger, rebalance_dispatch, time_driven_tick
from fleetsim.engine import RateTable, sc_select_event, variant_select_event
from fleetsim.model import (
    Event,
    EventKind,
    SystemConfig,
    SystemState,
    apply_event,
    initial_state,
)


def row_compositions(total_cap: int, slots: int):
    """All nonnegative integer tuples of length ``slots`` with sum <= cap."""
    if slots == 0:
        yield ()
        return
    for first in range(total_cap + 1):
        for rest in row_compositions(total_cap - first, slots - 1):
            yield (first, *rest)


def brute_force_flow(costs: np.ndarray, balance: np.ndarray, out_caps: np.ndarray):
    """Exhaustive optimum of the dispatch flow problem.

    Enumerates every integer matrix whose row sums respect the per-node
    dispatch pools, then filters on the net-balance constraints and exact
    demand satisfaction.  Returns (best_cost, one argmin matrix) or None
    if infeasible.  Tractable because the pools bound the enumeration.
    """
    n = balance.shape[0]
    demand_nodes = [i for i in range(n) if balance[i] < 0]
    rows_options = []
    for i in range(n):
        opts = []
        slots = [j for j in range(n) if j != i]
        for combo in row_compositions(int(out_caps[i]), len(slots)):
            row = np.zeros(n, dtype=np.int64)
            for j, v in zip(slots, combo):
                row[j] = v
            opts.append(row)
        rows_options.append(opts)
    best_cost, best_u = None, None
    for rows in itertools.product(*rows_options):
        u = np.stack(rows)
        net_out = u.sum(axis=1) - u.sum(axis=0)
        if np.any(net_out > balance):
            continue
        if any(net_out[j] != balance[j] for j in demand_nodes):
            continue
        cost = float((u * costs).sum())
        if best_cost is None or cost < best_cost - 1e-12:
            best_cost, best_u = cost, u
    return (best_cost, best_u) if best_cost is not None else None


def brute_force_dispatch_ilp(
    avail: np.ndarray, idle: np.ndarray, levels: np.ndarray, travel: np.ndarray
):
    """Exhaustive optimum of the integer dispatch program.

    Minimizes total expected empty driving time over all integer dispatch
    matrices that (a) keep every region's intended inventory at or above
    its fill level and (b) dispatch no more than each region's idle count.
    Returns (best_cost, matrix) or None when infeasible.
    """
    n = idle.shape[0]
    rows_options = []
    for i in range(n):
        opts = []
        slots = [j for j in range(n) if j != i]
        for combo in row_compositions(int(idle[i]), len(slots)):
            row = np.zeros(n, dtype=np.int64)
            for j, v in zip(slots, combo):
                row[j] = v
            opts.append(row)
        rows_options.append(opts)
    best_cost, best_u = None, None
    for rows in itertools.product(*rows_options):
        u = np.stack(rows)
        intended = avail + u.sum(axis=0) - u.sum(axis=1)
        if np.any(intended < levels):
            continue
        cost = float((u / travel).sum())
        if best_cost is None or cost < best_cost - 1e-12:
            best_cost, best_u = cost, u
    return (best_cost, best_u) if best_cost is not None else None


def two_sink_transportation(supplies, demands, costs):
    """Brute-force transportation optimum for exactly two sinks.

    ``costs[s][t]`` prices source ``s`` to sink ``t``; every source ships
    everything (callers pass balanced instances).  Enumerates the split of
    each source between the two sinks.
    """
    n_src = len(supplies)
    assert len(demands) == 2
    best = None
    for split in itertools.product(*(range(s + 1) for s in supplies)):
        to_first = sum(split)
        to_second = sum(supplies) - to_first
        if to_first != demands[0] or to_second != demands[1]:
            continue
        cost = sum(
            split[s] * costs[s][0] + (supplies[s] - split[s]) * costs[s][1]
            for s in range(n_src)
        )
        if best is None or cost < best[0] - 1e-12:
            best = (cost, split)
    return best


def uniformized_reference_path(
    config: SystemConfig,
    params: ControlParams | None,
    horizon: float,
    seed: int,
    mode: str,
):
    """Direct uniformized simulation of one path from the shared clock.

    Steps the domain model event by event in pure Python, consuming the
    same counter-indexed clock stream as the concurrent-estimation engine
    and resolving draws with the public selection routines.  Returns the
    event signature list (kind, i, j, time, rejected) and a counter dict.
    """
    clock = ClockStream(seed)
    table = RateTable.from_config(config)
    gamma = table.sc_rate if mode == "sc" else table.variant_rate
    select = sc_select_event if mode == "sc" else variant_select_event
    mu0 = config.intervals[0].travel_rates
    state = initial_state(config)
    levels = params.levels_for_interval(0) if params is not None else None
    next_sigma = params.trigger if params is not None and params.mode == "time" else inf
    is_event_mode = params is not None and params.mode == "event"

    events: list[tuple] = []
    counters = {"requests": 0, "rejected": 0, "fictitious": 0, "steps": 0, "empty_time": 0.0}
    t = 0.0
    k = 0
    while True:
        t_new = t + clock.v(k) / gamma
        while next_sigma <= t_new and next_sigma <= horizon:
            counters["empty_time"] += state.trips_empty.sum() * (next_sigma - t)
            t = next_sigma
            state.time = t
            events.append((int(EventKind.TIMEOUT), -1, -1, t, 0))
            flows = time_driven_tick(state, params, mu0)
            if flows.any():
                for i in range(config.n_regions):
                    for j in range(config.n_regions):
                        for _ in range(int(flows[i, j])):
                            events.append((int(EventKind.EMPTY_DEPARTURE), i, j, t, 0))
                state, _ = apply_event(state, Event(EventKind.EMPTY_DEPARTURE, -1, -1, t), flows)
            next_sigma += params.trigger
        if t_new >= horizon:
            counters["empty_time"] += state.trips_empty.sum() * (horizon - t)
            break
        counters["empty_time"] += state.trips_empty.sum() * (t_new - t)
        t = t_new
        state.time = t
        event = select(clock.u(k), table, state)
        k += 1
        counters["steps"] += 1
        if event.kind == EventKind.FICTITIOUS:
            counters["fictitious"] += 1
            events.append((int(EventKind.FICTITIOUS), -1, -1, t, 0))
            continue
        state, rejected = apply_event(state, event)
        if event.kind == EventKind.REQUEST:
            counters["requests"] += 1
            counters["rejected"] += int(rejected)
        events.append((int(event.kind), event.origin, event.dest, t, int(rejected)))
        if is_event_mode and not rejected:
            if event_trigger(state, params):
                flows = rebalance_dispatch(state, levels, mu0)
                for i in range(config.n_regions):
                    for j in range(config.n_regions):
                        for _ in range(int(flows[i, j])):
                            events.append((int(EventKind.EMPTY_DEPARTURE), i, j, t, 0))
                state, _ = apply_event(state, Event(EventKind.EMPTY_DEPARTURE, -1, -1, t), flows)
        continue
    return events, counters


def replay_trace(config: SystemConfig, trace, controller, horizon: float):
    """Re-drive the domain model with a recorded kernel trace.

    Checks, event by event: fleet conservation, feasibility of every
    transition, rejection flags consistent with the pre-event state, and,
    for threshold controllers, that every dispatch batch matches the
    reference controller decision at that state and that the event-driven
    trigger never passes unserved.  Returns reconstructed counters.
    """
    n = config.n_regions
    state = initial_state(config)
    m = config.fleet_size
    counters = {"requests": 0, "rejected": 0, "empty_time": 0.0}
    is_event = isinstance(controller, ControlParams) and controller.mode == "event"
    is_time = isinstance(controller, ControlParams) and controller.mode == "time"
    mu_for = lambda st: config.intervals[min(st.interval, config.n_intervals - 1)].travel_rates

    rows = list(trace.events())
    idx = 0
    prev_time = 0.0
    while idx < len(rows):
        event, rejected = rows[idx]
        counters["empty_time"] += state.trips_empty.sum() * (event.time - prev_time)
        prev_time = event.time
        if event.kind == EventKind.EMPTY_DEPARTURE:
            # collect the whole dispatch batch at this timestamp
            batch = np.zeros((n, n), dtype=np.int64)
            while idx < len(rows) and rows[idx][0].kind == EventKind.EMPTY_DEPARTURE and rows[idx][0].time == event.time:
                b = rows[idx][0]
                batch[b.origin, b.dest] += 1
                idx += 1
            expected = _expected_dispatch(state, controller, rows, idx, batch, mu_for(state))
            assert expected is not None, "dispatch recorded where controller would not fire"
            assert np.array_equal(batch, expected), "dispatch differs from controller decision"
            state, _ = apply_event(state, Event(EventKind.EMPTY_DEPARTURE, -1, -1, event.time), batch)
        else:
            state, re_rejected = apply_event(state, event)
            if event.kind == EventKind.REQUEST:
                counters["requests"] += 1
                counters["rejected"] += int(re_rejected)
                assert re_rejected == rejected, "rejection flag mismatch"
            idx += 1
            if is_event and event.kind in (
                EventKind.REQUEST,
                EventKind.FULL_ARRIVAL,
                EventKind.EMPTY_ARRIVAL,
            ) and not re_rejected:
                fired = event_trigger(state, controller)
                next_is_dispatch = idx < len(rows) and rows[idx][0].kind == EventKind.EMPTY_DEPARTURE and rows[idx][0].time == event.time
                assert fired == next_is_dispatch, f"trigger state {fired} but dispatch={next_is_dispatch} at t={event.time}"
        assert state.total_vehicles() == m, "fleet conservation violated"
    counters["empty_time"] += state.trips_empty.sum() * (horizon - prev_time)
    return counters


def _expected_dispatch(state, controller, rows, idx, batch, mu):
    if not isinstance(controller, ControlParams):
        # static controller: single empty departures, always one vehicle
        assert batch.sum() == 1
        return batch
    levels = controller.levels_for_interval(state.interval)
    if controller.mode == "event":
        if not event_trigger(state, controller):
            return None
        return rebalance_dispatch(state, levels, mu)
    return time_driven_tick(state, controller, mu)


def two_region_occupancy(trace, horizon: float) -> np.ndarray:
    """Time fraction spent in each canonical two-region one-vehicle state.

    Walks a nominal event trace maintaining the single vehicle's location;
    state order matches ``fleetsim.exact.TWO_REGION_STATES``.
    """
    spent = np.zeros(8)
    # start as initial_state(config) places the vehicle: idle in region 1
    current = 0
    prev_t = 0.0
    state_of_full = {(0, 0): 2, (0, 1): 3, (1, 0): 4, (1, 1): 5}
    state_of_empty = {(0, 1): 6, (1, 0): 7}
    for event, rejected in trace.events():
        spent[current] += event.time - prev_t
        prev_t = event.time
        if event.kind == EventKind.REQUEST and not rejected:
            current = state_of_full[(event.origin, event.dest)]
        elif event.kind == EventKind.FULL_ARRIVAL:
            current = event.dest  # idle_1 or idle_2
        elif event.kind == EventKind.EMPTY_ARRIVAL:
            current = event.dest
        elif event.kind == EventKind.EMPTY_DEPARTURE:
            current = state_of_empty[(event.origin, event.dest)]
    spent[current] += horizon - prev_t
    return spent / horizon
