"""Controller parameter tuning via concurrent estimation.

Two search strategies over the (fill levels, trigger) space:

* :func:`greedy_step` / :func:`greedy_search` - evaluate the incumbent and
  all single-coordinate +-1 perturbations on one shared clock and move to
  the best; within a step the comparison is exact (identical randomness),
  so accepted moves never increase the shared-clock objective estimate.
* :func:`random_search` - the shrinking-bounds scheme: per iteration, run
  several independent batches of uniformly drawn parameter vectors, record
  each batch's winner, and shrink the per-coordinate bounds to the winners'
  span.  Bounds can only narrow, and independent master seeds should end
  in overlapping bands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clock import split_seed
from .control import ControlParams
from .engine import concurrent_estimate
from .model import PathStats, SystemConfig, accumulate_objective

__all__ = [
    "SearchBounds",
    "SearchSchedule",
    "GreedyStep",
    "greedy_step",
    "greedy_search",
    "random_feasible_params",
    "RandomSearchResult",
    "random_search",
]

_RESAMPLE_CAP = 10_000


@dataclass(frozen=True)
class SearchBounds:
    """Inclusive per-coordinate integer bounds of the searchable space."""

    level_lo: np.ndarray
    level_hi: np.ndarray
    trigger_lo: int
    trigger_hi: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "level_lo", np.asarray(self.level_lo, dtype=np.int64))
        object.__setattr__(self, "level_hi", np.asarray(self.level_hi, dtype=np.int64))
        if np.any(self.level_lo > self.level_hi) or self.trigger_lo > self.trigger_hi:
            raise ValueError("bounds must satisfy lo <= hi")
        if self.trigger_lo < 1:
            raise ValueError("trigger bound must be at least 1")
        if np.any(self.level_lo < 0):
            raise ValueError("fill-level bounds must be nonnegative")

    @classmethod
    def full(cls, n_regions: int, fleet_size: int) -> "SearchBounds":
        return cls(
            level_lo=np.zeros(n_regions, dtype=np.int64),
            level_hi=np.full(n_regions, fleet_size, dtype=np.int64),
            trigger_lo=1,
            trigger_hi=fleet_size,
        )

    def contains(self, params: ControlParams) -> bool:
        levels = params.fill_levels
        return bool(
            np.all(levels >= self.level_lo)
            and np.all(levels <= self.level_hi)
            and self.trigger_lo <= params.trigger <= self.trigger_hi
        )

    def shrunk_to(self, winners: list[ControlParams]) -> "SearchBounds":
        """Narrow to the componentwise span of the batch winners."""
        levels = np.stack([w.fill_levels for w in winners])
        triggers = [int(w.trigger) for w in winners]
        return SearchBounds(
            level_lo=levels.min(axis=0),
            level_hi=levels.max(axis=0),
            trigger_lo=min(triggers),
            trigger_hi=max(triggers),
        )

    def span(self) -> tuple[list[tuple[int, int]], tuple[int, int]]:
        pairs = [(int(lo), int(hi)) for lo, hi in zip(self.level_lo, self.level_hi)]
        return pairs, (self.trigger_lo, self.trigger_hi)


@dataclass(frozen=True)
class SearchSchedule:
    """Per-iteration (horizon, paths per batch, batches) rows.

    Horizons must be non-decreasing: early iterations weed out disastrous
    vectors cheaply, later ones need sharper estimates on narrower bands.
    """

    rows: list[tuple[float, int, int]]

    def __post_init__(self) -> None:
        if not self.rows:
            raise ValueError("schedule must have at least one iteration")
        horizons = [row[0] for row in self.rows]
        if any(b < a for a, b in zip(horizons, horizons[1:])):
            raise ValueError("schedule horizons must be non-decreasing")
        for horizon, n_paths, n_batches in self.rows:
            if horizon <= 0 or n_paths < 1 or n_batches < 1:
                raise ValueError("schedule entries must be positive")


def _objective(stats: PathStats, config: SystemConfig) -> float:
    return accumulate_objective(stats, config.weight, config.fleet_size)


def _argmin_candidate(candidates: list[ControlParams], objectives: list[float], prefer: int | None = None) -> int:
    """Index of the best candidate; ties go to ``prefer`` if it is among
    them, else to the lexicographically smallest parameter tuple."""
    best = min(objectives)
    tied = [i for i, v in enumerate(objectives) if v == best]
    if prefer is not None and prefer in tied:
        return prefer
    return min(tied, key=lambda i: candidates[i].as_tuple())


@dataclass
class GreedyStep:
    """One move of the greedy search: chosen parameters and the evidence."""

    params: ControlParams
    objective: float
    moved: bool
    candidates: list[ControlParams]
    objectives: list[float]


def greedy_step(
    current: ControlParams,
    config: SystemConfig,
    horizon: float,
    seed: int,
    mode: str = "variant",
) -> GreedyStep:
    """Evaluate the incumbent and its +-1 neighborhood on one shared clock.

    Perturbations that leave the feasible set (negative level, total above
    the fleet, trigger outside its range) are skipped, so a degenerate
    search space simply has fewer candidates.  Returns the incumbent
    unchanged when nothing beats it, which doubles as the convergence
    signal.
    """
    current.validate(config.n_regions, config.fleet_size, 1)
    if current.fill_levels.ndim != 1:
        raise ValueError("greedy search tunes a single per-interval parameter set")
    n = config.n_regions
    m = config.fleet_size

    candidates = [current]
    seen = {current.as_tuple()}

    def consider(levels: np.ndarray, trigger: float) -> None:
        if np.any(levels < 0) or levels.sum() > m:
            return
        if current.mode == "event":
            if not 1 <= trigger <= m:
                return
        elif trigger <= 0:
            return
        cand = ControlParams(mode=current.mode, fill_levels=levels, trigger=trigger)
        key = cand.as_tuple()
        if key not in seen:
            seen.add(key)
            candidates.append(cand)

    for delta in (+1, -1):
        for i in range(n):
            levels = current.fill_levels.copy()
            levels[i] += delta
            consider(levels, current.trigger)
        consider(current.fill_levels.copy(), current.trigger + delta)

    stats = concurrent_estimate(config, candidates, horizon, seed, mode)
    objectives = [_objective(s, config) for s in stats]
    best = _argmin_candidate(candidates, objectives, prefer=0)
    return GreedyStep(
        params=candidates[best],
        objective=objectives[best],
        moved=best != 0,
        candidates=candidates,
        objectives=objectives,
    )


def greedy_search(
    start: ControlParams,
    config: SystemConfig,
    horizon: float,
    seed: int,
    mode: str = "variant",
    patience: int = 3,
    max_steps: int = 200,
) -> tuple[ControlParams, list[GreedyStep]]:
    """Iterated greedy descent with fresh clocks per step.

    Stops once the incumbent survives ``patience`` consecutive steps
    unmoved (deviations no longer help at this horizon).
    """
    params = start
    steps: list[GreedyStep] = []
    still = 0
    for step_index in range(max_steps):
        step = greedy_step(params, config, horizon, split_seed(seed, step_index), mode)
        steps.append(step)
        if step.moved:
            still = 0
            params = step.params
        else:
            still += 1
            if still >= patience:
                break
    return params, steps


def random_feasible_params(
    n_regions: int,
    fleet_size: int,
    bounds: SearchBounds,
    rng: np.random.Generator,
) -> ControlParams:
    """Uniform draw of an event-driven parameter vector within bounds.

    Draws are rejected until the fill levels fit the fleet; draws whose
    trigger exceeds the total fill level (a controller that can never
    fire) are also resampled while the bounds admit anything better.  If
    the cap is reached with only never-firing vectors available, the first
    fleet-feasible draw is returned rather than looping forever.
    """
    fallback = None
    for _ in range(_RESAMPLE_CAP):
        levels = rng.integers(bounds.level_lo, bounds.level_hi + 1)
        trigger = int(rng.integers(bounds.trigger_lo, bounds.trigger_hi + 1))
        if levels.sum() > fleet_size:
            continue
        params = ControlParams(mode="event", fill_levels=levels.astype(np.int64), trigger=trigger)
        if trigger <= int(levels.sum()):
            return params
        if fallback is None:
            fallback = params
    if fallback is not None:
        return fallback
    raise ValueError("bounds admit no fleet-feasible parameter vector")


@dataclass
class RandomSearchResult:
    """Everything the shrinking-bounds search produced.

    ``trace`` rows are ``(iteration, batch, levels..., trigger, objective,
    horizon, batch_seed)``, one per evaluated vector.
    """

    bounds: SearchBounds
    bounds_history: list[SearchBounds]
    batch_winners: list[list[ControlParams]]
    winner_objectives: list[list[float]]
    trace: list[tuple]


def random_search(
    config: SystemConfig,
    schedule: SearchSchedule,
    seed: int,
    mode: str = "variant",
    bounds: SearchBounds | None = None,
) -> RandomSearchResult:
    """Shrinking-bounds random search over event-driven parameters.

    Each batch gets an independent clock seed derived from the master seed
    (separate batches hedge against one unusual sample path favoring a
    clique of vectors).  After the batches of an iteration, bounds shrink
    to the span of the batch winners; they never widen.
    """
    n, m = config.n_regions, config.fleet_size
    if bounds is None:
        bounds = SearchBounds.full(n, m)
    history = [bounds]
    winners_per_iteration: list[list[ControlParams]] = []
    objectives_per_iteration: list[list[float]] = []
    trace: list[tuple] = []

    for iteration, (horizon, n_paths, n_batches) in enumerate(schedule.rows, start=1):
        winners: list[ControlParams] = []
        winner_objectives: list[float] = []
        for batch in range(n_batches):
            batch_seed = split_seed(seed, iteration * 4096 + batch)
            rng = np.random.default_rng(split_seed(batch_seed, 1))
            candidates = [random_feasible_params(n, m, bounds, rng) for _ in range(n_paths)]
            stats = concurrent_estimate(config, candidates, horizon, batch_seed, mode)
            objectives = [_objective(s, config) for s in stats]
            for cand, value in zip(candidates, objectives):
                trace.append(
                    (iteration, batch, *[int(v) for v in cand.fill_levels], int(cand.trigger), value, horizon, batch_seed)
                )
            best = _argmin_candidate(candidates, objectives)
            winners.append(candidates[best])
            winner_objectives.append(objectives[best])
        bounds = bounds.shrunk_to(winners)
        history.append(bounds)
        winners_per_iteration.append(winners)
        objectives_per_iteration.append(winner_objectives)

    return RandomSearchResult(
        bounds=bounds,
        bounds_history=history,
        batch_winners=winners_per_iteration,
        winner_objectives=objectives_per_iteration,
        trace=trace,
    )
