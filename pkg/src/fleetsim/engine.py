"""Simulation engine: nominal sample paths and concurrent estimation.

Nominal simulation uses standard next-event scheduling with per-event
exponential draws (fast and exact for the Markovian model).  Concurrent
estimation constructs one path per parameter set from a single shared
clock of uniformized draws; infeasible selections become fictitious
self-loops.  Two uniformization flavours are supported:

* ``"sc"`` - the uniform rate covers every conceivable event (all request
  streams plus all fleet-capacity completions), which makes the event
  partition state-independent at the price of many fictitious events;
* ``"variant"`` - the uniform rate is the maximal feasible total rate
  (requests plus the whole fleet on the fastest arc); requests keep a
  precomputed partition and completions are resolved per state, which
  trades a little per-event work for far fewer fictitious events.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .control import ControlParams, StaticRates
from .model import Event, EventKind, PathStats, SystemConfig, SystemState

__all__ = [
    "RateTable",
    "EventTrace",
    "run_nominal",
    "concurrent_estimate",
    "sc_select_event",
    "variant_select_event",
    "fictitious_bounds",
]


@dataclass
class RateTable:
    """Uniformization bookkeeping for one (interval, fleet size) pair.

    Cumulative weights are plain sequential sums in row-major arc order;
    the selection routines and the compiled kernels share this layout and
    produce bit-identical decisions.
    """

    request_rates: np.ndarray
    travel_rates: np.ndarray
    fleet_size: int
    request_cum: np.ndarray
    request_total: float
    capacity_cum: np.ndarray
    sc_rate: float
    variant_rate: float

    @classmethod
    def build(cls, request_rates: np.ndarray, travel_rates: np.ndarray, fleet_size: int) -> "RateTable":
        lam = np.asarray(request_rates, dtype=float)
        mu = np.asarray(travel_rates, dtype=float)
        request_cum = np.cumsum(lam.ravel())
        capacity_cum = np.cumsum(fleet_size * mu.ravel())
        request_total = float(request_cum[-1])
        return cls(
            request_rates=lam,
            travel_rates=mu,
            fleet_size=fleet_size,
            request_cum=request_cum,
            request_total=request_total,
            capacity_cum=capacity_cum,
            sc_rate=request_total + float(capacity_cum[-1]),
            variant_rate=request_total + fleet_size * float(mu.max()),
        )

    @classmethod
    def from_config(cls, config: SystemConfig, interval: int = 0, fleet_size: int | None = None) -> "RateTable":
        iv = config.intervals[interval]
        return cls.build(iv.request_rates, iv.travel_rates, fleet_size or config.fleet_size)

    @property
    def request_share(self) -> float:
        """Probability mass of the always-feasible request events (variant)."""
        return self.request_total / self.variant_rate


def sc_select_event(u: float, table: RateTable, state: SystemState) -> Event:
    """Resolve one uniformized draw under the state-independent partition.

    The unit interval is split into the request streams (row-major) followed
    by per-arc capacity blocks of ``fleet_size`` equal slots (row-major,
    full trips occupying the low slots, then empty trips).  A draw landing
    on a slot above the arc's en-route count is fictitious.
    """
    n = table.request_rates.shape[0]
    r = u * table.sc_rate
    if r < table.request_total:
        idx = min(int(np.searchsorted(table.request_cum, r, side="right")), n * n - 1)
        return Event(EventKind.REQUEST, idx // n, idx % n, state.time)
    rr = r - table.request_total
    arc = min(int(np.searchsorted(table.capacity_cum, rr, side="right")), n * n - 1)
    prev = table.capacity_cum[arc - 1] if arc > 0 else 0.0
    i, j = arc // n, arc % n
    slot = int((rr - prev) / table.travel_rates[i, j])
    if slot < state.trips_full[i, j]:
        return Event(EventKind.FULL_ARRIVAL, i, j, state.time)
    if slot < state.trips_full[i, j] + state.trips_empty[i, j]:
        return Event(EventKind.EMPTY_ARRIVAL, i, j, state.time)
    return Event(EventKind.FICTITIOUS, -1, -1, state.time)


def variant_select_event(u: float, table: RateTable, state: SystemState) -> Event:
    """Resolve one uniformized draw under the reduced-rate partition.

    Requests occupy the precomputed low band; the remaining band is
    partitioned on demand by the feasible completions of the current state
    (full-trip arcs row-major, then empty-trip arcs row-major); anything
    beyond the feasible mass is fictitious.
    """
    n = table.request_rates.shape[0]
    mu = table.travel_rates
    r = u * table.variant_rate
    if r < table.request_total:
        idx = min(int(np.searchsorted(table.request_cum, r, side="right")), n * n - 1)
        return Event(EventKind.REQUEST, idx // n, idx % n, state.time)
    rr = r - table.request_total
    # weights accumulated exactly as the kernels do: fresh row sums, fixed order
    yrow = [sum(state.trips_full[i, j] * mu[i, j] for j in range(n)) for i in range(n)]
    zrow = [sum(state.trips_empty[i, j] * mu[i, j] for j in range(n)) for i in range(n)]
    busy = 0.0
    for i in range(n):
        busy += yrow[i]
    for i in range(n):
        busy += zrow[i]
    if rr >= busy:
        return Event(EventKind.FICTITIOUS, -1, -1, state.time)
    acc = 0.0
    for i in range(n):
        if rr < acc + yrow[i]:
            for j in range(n):
                wij = state.trips_full[i, j] * mu[i, j]
                if rr < acc + wij:
                    return Event(EventKind.FULL_ARRIVAL, i, j, state.time)
                acc += wij
        acc += yrow[i]
    for i in range(n):
        if rr < acc + zrow[i]:
            for j in range(n):
                wij = state.trips_empty[i, j] * mu[i, j]
                if rr < acc + wij:
                    return Event(EventKind.EMPTY_ARRIVAL, i, j, state.time)
                acc += wij
        acc += zrow[i]
    return Event(EventKind.FICTITIOUS, -1, -1, state.time)


@dataclass
class EventTrace:
    """Flat record of a simulated event sequence.

    One row per event: ``(q, tau, kind, i, j, rejected)``, with regions
    0-based and ``-1`` for events without regions.  Dispatches appear as
    one empty-departure row per vehicle.
    """

    kinds: np.ndarray
    origins: np.ndarray
    dests: np.ndarray
    times: np.ndarray
    rejected: np.ndarray

    def __len__(self) -> int:
        return self.kinds.shape[0]

    def events(self):
        """Iterate rows as :class:`fleetsim.model.Event` plus rejected flag."""
        for q in range(len(self)):
            yield (
                Event(EventKind(int(self.kinds[q])), int(self.origins[q]), int(self.dests[q]), float(self.times[q])),
                bool(self.rejected[q]),
            )

    def signature(self) -> list[tuple]:
        """Comparable representation used by trace-equality tests."""
        return [
            (int(k), int(i), int(j), float(t), int(f))
            for k, i, j, t, f in zip(self.kinds, self.origins, self.dests, self.times, self.rejected)
        ]


def _trace_buffers(capacity: int):
    return (
        np.empty(capacity, np.int8),
        np.empty(capacity, np.int16),
        np.empty(capacity, np.int16),
        np.empty(capacity, np.float64),
        np.empty(capacity, np.int8),
    )


_EMPTY_TRACE = _trace_buffers(0)


def _pack_controller(
    config: SystemConfig, controller: ControlParams | StaticRates | None
) -> tuple[int, np.ndarray, float, np.ndarray]:
    n, k_count = config.n_regions, config.n_intervals
    theta = np.zeros((k_count, n), dtype=np.int64)
    omega = 0.0
    static_cum = np.zeros(n * n, dtype=np.float64)
    if controller is None:
        mode = K.CTRL_NONE
    elif isinstance(controller, StaticRates):
        if not config.time_invariant:
            raise ValueError("the static controller applies to time-invariant configurations")
        if controller.rates.shape != (n, n):
            raise ValueError("static rates shape mismatch")
        mode = K.CTRL_STATIC
        static_cum = np.cumsum(controller.rates.ravel())
    elif isinstance(controller, ControlParams):
        controller.validate(n, config.fleet_size, k_count)
        mode = K.CTRL_TIME if controller.mode == "time" else K.CTRL_EVENT
        levels = controller.fill_levels
        theta = (np.tile(levels, (k_count, 1)) if levels.ndim == 1 else levels.copy()).astype(np.int64)
        omega = float(controller.trigger)
    else:
        raise TypeError(f"unsupported controller {type(controller)!r}")
    return mode, theta, omega, static_cum


def _stats_from(vec: np.ndarray) -> PathStats:
    return PathStats(
        requests_total=int(vec[K.ST_REQ]),
        requests_rejected=int(vec[K.ST_REJ]),
        empty_time_integral=float(vec[K.ST_EMPTY]),
        elapsed=float(vec[K.ST_ELAPSED]),
        fictitious_events=int(vec[K.ST_FICT]),
        clock_steps=int(vec[K.ST_STEPS]),
    )


def run_nominal(
    config: SystemConfig,
    controller: ControlParams | StaticRates | None = None,
    horizon: float | None = None,
    seed: int = 0,
    record_trace: bool = False,
):
    """Simulate one nominal sample path.

    Returns :class:`PathStats`, or ``(PathStats, EventTrace)`` when
    ``record_trace`` is set.  Identical arguments yield bit-identical
    results.  ``controller`` may be None (no control), a
    :class:`ControlParams`, or a :class:`StaticRates`.
    """
    horizon = float(config.horizon if horizon is None else horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n, k_count = config.n_regions, config.n_intervals
    mode, theta, omega, static_cum = _pack_controller(config, controller)

    mu = np.stack([iv.travel_rates for iv in config.intervals])
    lam_cum = np.stack([np.cumsum(iv.request_rates.ravel()) for iv in config.intervals])
    inv_mu = 1.0 / mu

    stats_vec = np.zeros(K.N_STATS, dtype=np.float64)
    if record_trace:
        rate_bound = float(max(lam_cum[k][-1] for k in range(k_count))) + float(static_cum[-1])
        estimate = int(4.0 * rate_bound * horizon + horizon / max(omega, 1.0) + 4 * config.fleet_size + 10_000)
        if estimate > 200_000_000:
            raise ValueError("trace recording is impractical for a horizon this long")
        capacity = estimate
        while True:
            buffers = _trace_buffers(capacity)
            count = K.simulate_nominal(
                n, config.fleet_size, k_count, float(config.interval_length), horizon,
                lam_cum, mu, inv_mu, mode, theta, omega, static_cum,
                np.uint64(seed & 0xFFFFFFFFFFFFFFFF), stats_vec, *buffers,
            )
            if count >= 0:
                break
            capacity *= 2
        trace = EventTrace(*(buf[:count].copy() for buf in buffers))
        return _stats_from(stats_vec), trace

    K.simulate_nominal(
        n, config.fleet_size, k_count, float(config.interval_length), horizon,
        lam_cum, mu, inv_mu, mode, theta, omega, static_cum,
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF), stats_vec, *_EMPTY_TRACE,
    )
    return _stats_from(stats_vec)


def concurrent_estimate(
    config: SystemConfig,
    param_list: list[ControlParams | None],
    horizon: float | None = None,
    seed: int = 0,
    mode: str = "variant",
    record_trace: bool = False,
):
    """Evaluate many parameter sets on sample paths built from one clock.

    Returns one :class:`PathStats` per entry of ``param_list`` (``None``
    means no control); with ``record_trace`` also returns the event trace
    of path 0, fictitious self-loops included.  Restricted to
    time-invariant configurations; time-varying scenarios are simulated
    nominally instead.
    """
    if not config.time_invariant:
        raise ValueError("concurrent estimation requires a time-invariant configuration")
    if not param_list:
        raise ValueError("param_list must not be empty")
    if mode not in ("sc", "variant"):
        raise ValueError("mode must be 'sc' or 'variant'")
    horizon = float(config.horizon if horizon is None else horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")

    n = config.n_regions
    n_paths = len(param_list)
    ctrl_mode = np.zeros(n_paths, dtype=np.int64)
    theta = np.zeros((n_paths, n), dtype=np.int64)
    omega = np.zeros(n_paths, dtype=np.float64)
    for p, params in enumerate(param_list):
        if params is None:
            ctrl_mode[p] = K.CTRL_NONE
            continue
        if isinstance(params, StaticRates):
            raise ValueError("the static controller is not a concurrent-estimation subject")
        params.validate(n, config.fleet_size, 1)
        ctrl_mode[p] = K.CTRL_TIME if params.mode == "time" else K.CTRL_EVENT
        theta[p] = params.levels_for_interval(0)
        omega[p] = float(params.trigger)

    table = RateTable.from_config(config)
    ce_mode = K.CE_SC if mode == "sc" else K.CE_VARIANT
    gamma = table.sc_rate if mode == "sc" else table.variant_rate
    stats = np.zeros((n_paths, K.N_STATS), dtype=np.float64)
    mu0 = config.intervals[0].travel_rates
    args = (
        n, config.fleet_size, horizon, table.request_cum, mu0, 1.0 / mu0,
        ce_mode, gamma, table.capacity_cum, ctrl_mode, theta, omega,
        np.uint64(seed & 0xFFFFFFFFFFFFFFFF), stats,
    )
    if record_trace:
        estimate = int(1.5 * gamma * horizon + 4 * config.fleet_size + 10_000)
        if estimate > 200_000_000:
            raise ValueError("trace recording is impractical for a horizon this long")
        capacity = estimate
        while True:
            buffers = _trace_buffers(capacity)
            count = K.simulate_ce_batch(*args, *buffers)
            if count >= 0:
                break
            capacity *= 2
        trace = EventTrace(*(buf[:count].copy() for buf in buffers))
        return [_stats_from(stats[p]) for p in range(n_paths)], trace

    K.simulate_ce_batch(*args, *_EMPTY_TRACE)
    return [_stats_from(stats[p]) for p in range(n_paths)]


def fictitious_bounds(config: SystemConfig, fleet_size: int | None = None, mode: str = "variant") -> tuple[float, float]:
    """Closed-form bounds on the fictitious-event fraction of a CE run.

    Derived from the uniformization rates: the fictitious probability in a
    state is one minus the ratio of the state's feasible rate to the
    uniform rate, and the feasible rate ranges from the bare request total
    (no vehicle en route) to requests plus the whole fleet on the fastest
    arc.
    """
    if not config.time_invariant:
        raise ValueError("fictitious-event bounds require a time-invariant configuration")
    table = RateTable.from_config(config, fleet_size=fleet_size)
    lam_sum = table.request_total
    busiest = table.variant_rate  # lam + m * max mu
    everything = table.sc_rate  # lam + m * sum mu
    if mode == "sc":
        return (1.0 - busiest / everything, 1.0 - lam_sum / everything)
    if mode == "variant":
        return (0.0, 1.0 - lam_sum / busiest)
    raise ValueError("mode must be 'sc' or 'variant'")

