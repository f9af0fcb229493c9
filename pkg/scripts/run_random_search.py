#!/usr/bin/env python3
"""Shrinking-bounds random search over event-driven controller parameters.

Runs the full published iteration schedule by default (15 iterations,
25 batches each, 25..500 concurrently estimated paths per batch) and
prints the per-iteration parameter bands and the best final vector.

    python3 scripts/run_random_search.py --fleet 50 --seed 101
"""

import argparse

import numpy as np

from fleetsim.config import published_search_schedule, six_region_benchmark
from fleetsim.tuner import SearchSchedule, random_search


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fleet", type=int, default=50)
    parser.add_argument("--seed", type=int, default=101)
    parser.add_argument("--quick", action="store_true", help="small 3-iteration schedule for smoke runs")
    args = parser.parse_args()

    config = six_region_benchmark(args.fleet)
    if args.quick:
        schedule = SearchSchedule([(500.0, 25, 10), (2000.0, 25, 10), (5000.0, 50, 10)])
    else:
        schedule = published_search_schedule()

    result = random_search(config, schedule, seed=args.seed)
    for iteration, bounds in enumerate(result.bounds_history):
        levels, trigger = bounds.span()
        bands = " ".join(f"[{lo},{hi}]" for lo, hi in levels)
        print(f"iter {iteration:>2}: levels {bands}  trigger [{trigger[0]},{trigger[1]}]")
    final = result.batch_winners[-1]
    objectives = result.winner_objectives[-1]
    best = final[int(np.argmin(objectives))]
    print(f"best final-iteration vector: levels {best.fill_levels.tolist()} trigger {best.trigger} "
          f"(J = {min(objectives):.4f})")


if __name__ == "__main__":
    main()
