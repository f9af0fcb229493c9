"""Domain model: system configuration, state, events, and the transition rule.

The system is a closed network of ``m`` vehicles circulating among ``n``
regions.  A vehicle is idle in some region, driving a passenger between two
regions, or driving empty as part of a rebalancing action.  State changes
only at events; :func:`apply_event` is the single source of truth for the
transition dynamics and is deliberately written as a pure function so that
randomized event sequences can be replayed and checked against the compiled
simulation kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "EventKind",
    "Event",
    "IntervalParams",
    "SystemConfig",
    "SystemState",
    "PathStats",
    "initial_state",
    "apply_event",
    "accumulate_objective",
    "validate_control",
]


class EventKind(IntEnum):
    """The event alphabet of the network.

    ``FICTITIOUS`` never occurs in nominal simulation; it appears only in
    concurrent-estimation traces, marking uniformization self-loops.
    """

    INTERVAL_START = 0   # scheduled switch of the rate tables
    REQUEST = 1          # user asks for a trip from origin to destination
    FULL_ARRIVAL = 2     # passenger trip completes at destination
    EMPTY_ARRIVAL = 3    # rebalancing trip completes at destination
    EMPTY_DEPARTURE = 4  # controller dispatches empty vehicles
    TIMEOUT = 5          # periodic tick of the time-driven controller
    FICTITIOUS = 6       # uniformization self-loop (concurrent estimation)


@dataclass(frozen=True)
class Event:
    """A single event instance.

    ``origin``/``dest`` are 0-based region indices and are meaningful for
    request, arrival, and empty-departure events; scheduled events
    (interval start, timeout) carry ``-1``.
    """

    kind: EventKind
    origin: int = -1
    dest: int = -1
    time: float = 0.0


@dataclass
class IntervalParams:
    """Rate tables in force during one interval.

    ``request_rates[i, j]`` is the Poisson rate of trip requests from region
    ``i`` to region ``j`` (events per unit time, diagonal allowed).
    ``travel_rates[i, j]`` is the trip-completion rate on the arc, i.e. the
    reciprocal of the mean travel time.  Zero travel rates are rejected:
    every arc must be drivable because a controller may route flow anywhere.
    """

    request_rates: np.ndarray
    travel_rates: np.ndarray

    def __post_init__(self) -> None:
        self.request_rates = np.asarray(self.request_rates, dtype=float)
        self.travel_rates = np.asarray(self.travel_rates, dtype=float)
        if self.request_rates.ndim != 2 or self.request_rates.shape[0] != self.request_rates.shape[1]:
            raise ValueError("request_rates must be a square matrix")
        if self.travel_rates.shape != self.request_rates.shape:
            raise ValueError("travel_rates shape must match request_rates")
        if np.any(self.request_rates < 0):
            raise ValueError("request rates must be nonnegative")
        if np.any(self.travel_rates <= 0):
            raise ValueError("travel rates must be strictly positive")

    @property
    def n_regions(self) -> int:
        return self.request_rates.shape[0]


@dataclass
class SystemConfig:
    """Static description of a scenario.

    ``intervals`` holds one rate table per interval; all intervals share the
    common length ``interval_length``.  Past the last interval the final
    table stays in force, so a single-interval (time-invariant) scenario may
    run for an arbitrary horizon.
    """

    n_regions: int
    fleet_size: int
    intervals: list[IntervalParams]
    interval_length: float
    weight: float
    horizon: float

    def __post_init__(self) -> None:
        if self.n_regions < 1:
            raise ValueError("need at least one region")
        if self.fleet_size < 1:
            raise ValueError("need at least one vehicle")
        if not self.intervals:
            raise ValueError("need at least one interval")
        if not 0.0 < self.weight <= 1.0:
            raise ValueError("objective weight must be in (0, 1]")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.interval_length <= 0:
            raise ValueError("interval length must be positive")
        for iv in self.intervals:
            if iv.n_regions != self.n_regions:
                raise ValueError("interval rate tables must be n_regions x n_regions")

    @property
    def n_intervals(self) -> int:
        return len(self.intervals)

    @property
    def time_invariant(self) -> bool:
        return len(self.intervals) == 1


@dataclass
class SystemState:
    """Snapshot of the network between events.

    ``idle[i]`` counts idle vehicles in region ``i``; ``trips_full[i, j]``
    and ``trips_empty[i, j]`` count vehicles en route from ``i`` to ``j``
    with and without a passenger.  ``interval`` is the 0-based index of the
    rate table in force; ``time`` the current simulation time.
    """

    idle: np.ndarray
    trips_full: np.ndarray
    trips_empty: np.ndarray
    interval: int = 0
    time: float = 0.0

    def __post_init__(self) -> None:
        self.idle = np.asarray(self.idle, dtype=np.int64)
        self.trips_full = np.asarray(self.trips_full, dtype=np.int64)
        self.trips_empty = np.asarray(self.trips_empty, dtype=np.int64)

    @property
    def n_regions(self) -> int:
        return self.idle.shape[0]

    def total_vehicles(self) -> int:
        """Fleet conservation check: idle plus en-route vehicle count."""
        return int(self.idle.sum() + self.trips_full.sum() + self.trips_empty.sum())

    def copy(self) -> "SystemState":
        return SystemState(
            idle=self.idle.copy(),
            trips_full=self.trips_full.copy(),
            trips_empty=self.trips_empty.copy(),
            interval=self.interval,
            time=self.time,
        )


@dataclass
class PathStats:
    """Aggregate outcome of one simulated sample path.

    ``empty_time_integral`` is the time integral of the number of empty
    en-route vehicles, accumulated event by event with the value held since
    the previous event.  ``fictitious_events`` and ``clock_steps`` are only
    populated by the concurrent-estimation engine.
    """

    requests_total: int = 0
    requests_rejected: int = 0
    empty_time_integral: float = 0.0
    elapsed: float = 0.0
    fictitious_events: int = 0
    clock_steps: int = 0

    @property
    def rejected_fraction(self) -> float:
        if self.requests_total == 0:
            return 0.0
        return self.requests_rejected / self.requests_total


def initial_state(config: SystemConfig) -> SystemState:
    """Deterministic start: the fleet spread evenly over regions.

    Region ``i`` gets ``m // n`` idle vehicles plus one of the remainder for
    ``i < m % n``.  Long-horizon statistics do not depend on this choice;
    fixing it keeps seeded runs reproducible.
    """
    n, m = config.n_regions, config.fleet_size
    idle = np.full(n, m // n, dtype=np.int64)
    idle[: m % n] += 1
    return SystemState(
        idle=idle,
        trips_full=np.zeros((n, n), dtype=np.int64),
        trips_empty=np.zeros((n, n), dtype=np.int64),
    )


def validate_control(control: np.ndarray, idle: np.ndarray) -> None:
    """Reject control matrices that are malformed or infeasible.

    A control is a nonnegative integer matrix of empty-dispatch counts with
    zero diagonal whose row sums do not exceed the idle counts.
    """
    control = np.asarray(control)
    n = idle.shape[0]
    if control.shape != (n, n):
        raise ValueError("control matrix must be n_regions x n_regions")
    if np.any(control < 0):
        raise ValueError("control matrix must be nonnegative")
    if np.any(np.diag(control) != 0):
        raise ValueError("empty intra-region dispatches are not allowed")
    rows = control.sum(axis=1)
    if np.any(rows > idle):
        raise ValueError("control exceeds idle vehicles in some region")


def apply_event(
    state: SystemState,
    event: Event,
    control: np.ndarray | None = None,
) -> tuple[SystemState, bool]:
    """Advance the state by one event; returns ``(new_state, rejected)``.

    ``rejected`` is True exactly when a request arrives at a region with no
    idle vehicle, in which case the counts are unchanged.  ``control`` must
    be supplied with EMPTY_DEPARTURE events and nothing else.  Infeasible
    events (an arrival on an arc with no vehicle en route) indicate a
    simulator bug and raise.
    """
    if (control is not None) != (event.kind == EventKind.EMPTY_DEPARTURE):
        raise ValueError("control matrices accompany empty-departure events only")

    new = state.copy()
    new.time = event.time
    rejected = False
    i, j = event.origin, event.dest

    if event.kind == EventKind.REQUEST:
        if state.idle[i] > 0:
            new.idle[i] -= 1
            new.trips_full[i, j] += 1
        else:
            rejected = True
    elif event.kind == EventKind.FULL_ARRIVAL:
        if state.trips_full[i, j] <= 0:
            raise ValueError(f"full arrival on empty arc ({i}, {j})")
        new.trips_full[i, j] -= 1
        new.idle[j] += 1
    elif event.kind == EventKind.EMPTY_ARRIVAL:
        if state.trips_empty[i, j] <= 0:
            raise ValueError(f"empty arrival on empty arc ({i}, {j})")
        new.trips_empty[i, j] -= 1
        new.idle[j] += 1
    elif event.kind == EventKind.EMPTY_DEPARTURE:
        validate_control(control, state.idle)
        ctrl = np.asarray(control, dtype=np.int64)
        new.idle -= ctrl.sum(axis=1)
        new.trips_empty += ctrl
    elif event.kind == EventKind.INTERVAL_START:
        new.interval += 1
    elif event.kind == EventKind.TIMEOUT:
        pass
    elif event.kind == EventKind.FICTITIOUS:
        pass
    else:
        raise ValueError(f"unknown event kind {event.kind}")

    return new, rejected


def accumulate_objective(stats: PathStats, weight: float, fleet_size: int) -> float:
    """Realized objective of a path: weighted rejected and empty fractions.

    Returns ``w * rejected/total + (1 - w) * empty_time / (elapsed * m)``.
    A path with no requests has rejected fraction 0 by convention (short
    concurrent-estimation runs can produce such paths).
    """
    if stats.elapsed <= 0:
        raise ValueError("path must have positive elapsed time")
    empty_fraction = stats.empty_time_integral / (stats.elapsed * fleet_size)
    return weight * stats.rejected_fraction + (1.0 - weight) * empty_fraction
