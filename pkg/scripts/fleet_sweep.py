#!/usr/bin/env python3
"""Fleet-size sweep: mean objective per controller, CSV on stdout.

Produces the data behind the controller-comparison figure: for each fleet
size, the mean objective of the four controllers over independent seeds
plus the fluid lower bound.

    python3 scripts/fleet_sweep.py --fleets 50,75,100,125 --runs 10 > sweep.csv
"""

import argparse
import csv
import sys

import numpy as np

from fleetsim.clock import split_seed
from fleetsim.config import six_region_benchmark
from fleetsim.engine import run_nominal
from fleetsim.exact import lower_bound
from fleetsim.model import accumulate_objective

from reproduce_performance_table import controllers_for


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fleets", default="50,75,100,125")
    parser.add_argument("--horizon", type=float, default=100_000.0)
    parser.add_argument("--runs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    writer = csv.writer(sys.stdout)
    writer.writerow(["m", "controller", "mean_J", "stderr_J"])
    for fleet in (int(v) for v in args.fleets.split(",")):
        config = six_region_benchmark(fleet, horizon=args.horizon)
        for name, controller in controllers_for(config).items():
            values = [
                accumulate_objective(
                    run_nominal(config, controller, args.horizon, split_seed(args.seed, 100 * fleet + run)),
                    config.weight,
                    fleet,
                )
                for run in range(args.runs)
            ]
            writer.writerow(
                [fleet, name, f"{np.mean(values):.6f}", f"{np.std(values, ddof=1) / np.sqrt(len(values)):.6f}"]
            )
        writer.writerow([fleet, "lower-bound", f"{lower_bound(config).value:.6f}", "0"])


if __name__ == "__main__":
    main()
