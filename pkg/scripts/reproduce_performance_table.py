#!/usr/bin/env python3
"""Reproduce the 75-vehicle performance comparison on the bundled benchmark.

Simulates the four controllers over independent seeds, adds the fluid
lower bound, and prints a small table of mean percentages.

    python3 scripts/reproduce_performance_table.py --runs 10 --horizon 100000
"""

import argparse

import numpy as np

from fleetsim.clock import split_seed
from fleetsim.config import BENCHMARK_EVENT_PARAMS, BENCHMARK_TIME_PERIODS, six_region_benchmark
from fleetsim.control import ControlParams, static_rates
from fleetsim.engine import run_nominal
from fleetsim.exact import lower_bound
from fleetsim.model import accumulate_objective


def controllers_for(config):
    fleet = config.fleet_size
    levels, trigger = BENCHMARK_EVENT_PARAMS[fleet]
    return {
        "none": None,
        "static": static_rates(config),
        "time-driven": ControlParams(
            mode="time",
            fill_levels=np.full(6, fleet // 6, np.int64),
            trigger=BENCHMARK_TIME_PERIODS[fleet],
        ),
        "event-driven": ControlParams(
            mode="event", fill_levels=np.array(levels, np.int64), trigger=trigger
        ),
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fleet", type=int, default=75)
    parser.add_argument("--horizon", type=float, default=100_000.0)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    config = six_region_benchmark(args.fleet, horizon=args.horizon)
    print(f"fleet={args.fleet}  horizon={args.horizon:g}  runs={args.runs}")
    print(f"{'controller':<14} {'% rejected':>10} {'% empty':>9} {'J':>8}")
    for name, controller in controllers_for(config).items():
        rejected, empty, objective = [], [], []
        for run in range(args.runs):
            stats = run_nominal(config, controller, args.horizon, split_seed(args.seed, run))
            rejected.append(100 * stats.rejected_fraction)
            empty.append(100 * stats.empty_time_integral / (stats.elapsed * args.fleet))
            objective.append(accumulate_objective(stats, config.weight, args.fleet))
        print(f"{name:<14} {np.mean(rejected):>10.1f} {np.mean(empty):>9.1f} {np.mean(objective):>8.4f}")
    bound = lower_bound(config)
    print(
        f"{'lower bound':<14} {100 * bound.rejected_fraction:>10.1f} "
        f"{100 * bound.empty_fraction:>9.1f} {bound.value:>8.4f}"
    )


if __name__ == "__main__":
    main()
