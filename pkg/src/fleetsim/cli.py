"""Experiment driver.

Subcommands::

    simulate    nominal sample paths per (controller, fleet size, seed)
    tune        greedy or random parameter search via concurrent estimation
    exact       lower-bound / ctmc / analytic / dp / cardinality reports
    fictitious  fictitious-event bounds and observed fractions per CE mode
    trace       event trace of one nominal path as CSV

Every stochastic command takes one 64-bit master seed; sub-seeds are
derived as ``split_seed(master, index)`` with the indices noted per
command, so any row of any report can be reproduced in isolation.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 numeric
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .clock import split_seed
from .config import (
    BENCHMARK_EVENT_PARAMS,
    BENCHMARK_TIME_PERIODS,
    ConfigError,
    dump_control_params,
    load_config,
    load_control_params,
    published_search_schedule,
)
from .control import ControlParams, static_rates
from .engine import concurrent_estimate, fictitious_bounds, run_nominal
from .exact import (
    analytic_coefficients,
    ctmc_steady_state,
    dp_small_system,
    lower_bound,
    optimal_rate_policy,
    state_space_size,
    states_with_min_controls,
    TWO_REGION_STATES,
)
from .model import EventKind, accumulate_objective
from .tuner import SearchSchedule, greedy_search, random_search

USAGE_ERROR, CONFIG_ERROR, NUMERIC_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(USAGE_ERROR)


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _parse_fleet(arg: str | None, default: int) -> list[int]:
    if not arg:
        return [default]
    try:
        return [int(tok) for tok in arg.split(",") if tok]
    except ValueError:
        raise ConfigError(f"bad fleet list {arg!r}")


def cmd_simulate(args) -> int:
    config, config_controller = load_config(args.config)
    fleets = _parse_fleet(args.fleet, config.fleet_size)
    horizon = args.horizon or config.horizon
    if args.controller:
        controllers = args.controller.split(",")
    else:
        controllers = [config_controller.mode if config_controller is not None else "none"]
    if controllers == ["all"]:
        controllers = ["none", "static", "time", "event"]

    wants_threshold = any(kind in ("time", "event", "all") for kind in (args.controller or "").split(",")) or (
        args.controller is None and config_controller is not None
    )
    file_params = load_control_params(args.params) if args.params and wants_threshold else None
    inline_levels = [int(v) for v in args.theta.split(",")] if args.theta else None

    out, should_close = _open_out(args.out)
    writer = csv.writer(out)
    writer.writerow(["m", "controller", "w", "T", "seed", "pct_rejected", "pct_empty", "J"])
    try:
        for f_idx, fleet in enumerate(fleets):
            cfg = _with_fleet(config, fleet)
            for c_idx, kind in enumerate(controllers):
                controller = _controller_for_row(
                    kind, cfg, config_controller, file_params, inline_levels, args.omega,
                    params_path=args.params if kind == "static" else None,
                )
                for run in range(args.runs):
                    seed = split_seed(args.seed, f_idx * 65536 + c_idx * 1024 + run)
                    stats = run_nominal(cfg, controller, horizon, seed)
                    j = accumulate_objective(stats, cfg.weight, cfg.fleet_size)
                    empty = stats.empty_time_integral / (stats.elapsed * cfg.fleet_size)
                    writer.writerow(
                        [fleet, kind, _fmt(cfg.weight), _fmt(horizon), seed,
                         _fmt(100.0 * stats.rejected_fraction), _fmt(100.0 * empty), _fmt(j)]
                    )
    finally:
        if should_close:
            out.close()
    return 0


def _with_fleet(config, fleet):
    if fleet == config.fleet_size:
        return config
    from dataclasses import replace

    if fleet < 1:
        raise ConfigError("fleet sizes must be positive")
    return replace(config, fleet_size=fleet)


def _is_benchmark(config) -> bool:
    """Whether this is the bundled six-region scenario (tuned defaults apply)."""
    if config.n_regions != 6 or not config.time_invariant:
        return False
    from .config import six_region_benchmark

    reference = six_region_benchmark(config.fleet_size)
    return np.allclose(
        config.intervals[0].request_rates, reference.intervals[0].request_rates
    ) and np.allclose(config.intervals[0].travel_rates, reference.intervals[0].travel_rates)


def _controller_for_row(kind, config, config_controller, file_params, inline_levels, inline_trigger, params_path=None):
    if kind == "none":
        return None
    if kind == "static":
        if params_path is not None:
            from .config import load_static_rates

            return load_static_rates(params_path)
        return static_rates(config)
    if kind not in ("time", "event"):
        raise ConfigError(f"unknown controller {kind!r}")
    params = file_params
    if params is None and inline_levels is not None:
        if inline_trigger is None:
            raise ConfigError("--theta also needs --omega")
        params = ControlParams(mode=kind, fill_levels=np.array(inline_levels, dtype=np.int64), trigger=inline_trigger)
    if params is None and config_controller is not None and config_controller.mode == kind:
        params = config_controller
    if params is None and kind == "time":
        # baseline recovery: spread the fleet evenly; the period comes from
        # --omega, the tuned table (benchmark only), or the half-hour default
        n = config.n_regions
        levels = np.full(n, config.fleet_size // n, dtype=np.int64)
        if inline_trigger is not None:
            trigger = inline_trigger
        elif _is_benchmark(config):
            trigger = BENCHMARK_TIME_PERIODS.get(config.fleet_size, 30.0)
        else:
            trigger = 30.0
        params = ControlParams(mode="time", fill_levels=levels, trigger=trigger)
    if params is None and kind == "event" and _is_benchmark(config):
        published = BENCHMARK_EVENT_PARAMS.get(config.fleet_size)
        if published is not None:
            params = ControlParams(mode="event", fill_levels=np.array(published[0], dtype=np.int64), trigger=published[1])
    if params is None:
        raise ConfigError(f"controller {kind!r} needs parameters (--params or --theta/--omega)")
    if params.mode != kind:
        raise ConfigError(f"parameters are for mode {params.mode!r}, requested {kind!r}")
    params.validate(config.n_regions, config.fleet_size, config.n_intervals)
    return params


def cmd_tune(args) -> int:
    config, config_controller = load_config(args.config)
    if args.search == "greedy":
        start = load_control_params(args.params) if args.params else config_controller
        if start is None:
            raise ConfigError("greedy search needs a starting vector (--params or config controller)")
        horizon = args.horizon or config.horizon
        best, steps = greedy_search(start, config, horizon, args.seed, mode=args.ce_mode)
        payload = dump_control_params(best)
        payload["objective"] = steps[-1].objective
        payload["steps"] = len(steps)
        _write_json(args.out, payload)
        if args.trace_out:
            with open(args.trace_out, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["step", *(f"theta_{i + 1}" for i in range(config.n_regions)), "omega", "J_estimate", "moved"])
                for idx, step in enumerate(steps):
                    writer.writerow([idx, *step.params.as_tuple(), _fmt(step.objective), int(step.moved)])
        return 0

    schedule = _load_schedule(args.schedule) if args.schedule else published_search_schedule()
    result = random_search(config, schedule, args.seed, mode=args.ce_mode)
    final_winners = result.batch_winners[-1]
    final_objectives = result.winner_objectives[-1]
    best = final_winners[int(np.argmin(final_objectives))]
    levels, trigger = result.bounds.span()
    payload = dump_control_params(best)
    payload["objective"] = float(min(final_objectives))
    payload["final_bounds"] = {"theta": levels, "omega": list(trigger)}
    _write_json(args.out, payload)
    if args.trace_out:
        with open(args.trace_out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iteration", "batch", *(f"theta_{i + 1}" for i in range(config.n_regions)), "omega", "J_estimate", "T", "seed"]
            )
            for row in result.trace:
                writer.writerow([*row[:-3], _fmt(row[-3]), _fmt(row[-2]), row[-1]])
    return 0


def _load_schedule(path: str) -> SearchSchedule:
    raw = json.loads(Path(path).read_text())
    return SearchSchedule([(float(r["T"]), int(r["L"]), int(r["K"])) for r in raw])


def cmd_exact(args) -> int:
    if args.what == "cardinality":
        if args.regions is None or args.fleet_n is None:
            raise ConfigError("cardinality needs --regions and --fleet")
        payload = {
            "regions": args.regions,
            "fleet": args.fleet_n,
            "states": str(state_space_size(args.regions, args.fleet_n)),
            "states_with_min_controls": str(states_with_min_controls(args.regions, args.fleet_n)),
        }
        _write_json(args.out, payload)
        return 0

    config, _ = load_config(args.config)
    if args.what == "lower-bound":
        fleet = args.fleet_n or config.fleet_size
        result = lower_bound(config, fleet_size=fleet)
        payload = {
            "fleet": fleet,
            "weight": config.weight,
            "value": result.value,
            "pct_rejected": 100.0 * result.rejected_fraction,
            "pct_empty": 100.0 * result.empty_fraction,
            "ignored_fraction": result.ignored.tolist(),
            "flows": result.flows.tolist(),
            "net_request_outflow": result.net_outflow.tolist(),
        }
        _write_json(args.out, payload)
        return 0

    if config.n_regions != 2:
        raise ConfigError(f"exact {args.what} applies to two-region systems")
    lam = config.intervals[0].request_rates
    mu = config.intervals[0].travel_rates
    if args.what == "ctmc":
        pi = ctmc_steady_state(lam, mu, args.send12, args.send21)
        _write_json(args.out, {"states": list(TWO_REGION_STATES), "pi": pi.tolist()})
        return 0
    if args.what == "analytic":
        coeffs = analytic_coefficients(lam, mu)
        policy = optimal_rate_policy(lam, mu)
        payload = {
            "coefficients": {k: getattr(coeffs, k) for k in (
                "num_cross", "num_12", "num_21", "num_const", "den_cross", "den_12", "den_21", "den_const")},
            "corner_values": {f"{k[0]},{k[1]}": v for k, v in policy.corner_values.items()},
            "policy": [("inf" if np.isinf(v) else 0) for v in policy.policy],
        }
        _write_json(args.out, payload)
        return 0
    if args.what == "dp":
        if config.fleet_size != 1:
            raise ConfigError(
                "dynamic programming is limited to the two-region single-vehicle system; "
                f"this one has {state_space_size(config.n_regions, config.fleet_size)} states, "
                "beyond any reasonable memory"
            )
        solution = dp_small_system(lam, mu)
        payload = {
            "average_cost": solution.average_cost,
            "differential": solution.differential,
            "policy": solution.policy,
        }
        _write_json(args.out, payload)
        return 0
    raise ConfigError(f"unknown exact subcommand {args.what!r}")


def cmd_fictitious(args) -> int:
    config, _ = load_config(args.config)
    fleet = args.fleet_n or config.fleet_size
    cfg = _with_fleet(config, fleet)
    horizon = args.horizon or 10_000.0
    modes = ["sc", "variant"] if args.ce_mode == "both" else [args.ce_mode]
    report = {"fleet": fleet, "horizon": horizon, "modes": {}}
    for mode in modes:
        lo, hi = fictitious_bounds(cfg, fleet, mode)
        observed = []
        for run in range(args.runs):
            seed = split_seed(args.seed, run)
            stats = concurrent_estimate(cfg, [None], horizon, seed, mode)[0]
            observed.append(stats.fictitious_events / max(stats.clock_steps, 1))
        report["modes"][mode] = {
            "bound_min_pct": 100.0 * lo,
            "bound_max_pct": 100.0 * hi,
            "observed_pct": [100.0 * v for v in observed],
        }
    _write_json(args.out, report)
    return 0


def cmd_trace(args) -> int:
    config, config_controller = load_config(args.config)
    file_params = load_control_params(args.params) if args.params else None
    inline_levels = [int(v) for v in args.theta.split(",")] if args.theta else None
    controller = _controller_for_row(
        args.controller or ("none" if config_controller is None else config_controller.mode),
        config, config_controller, file_params, inline_levels, args.omega,
    )
    horizon = args.horizon or config.horizon
    _, trace = run_nominal(config, controller, horizon, args.seed, record_trace=True)
    out, should_close = _open_out(args.out)
    try:
        writer = csv.writer(out)
        writer.writerow(["q", "tau", "kind", "i", "j", "rejected"])
        for q, (event, rejected) in enumerate(trace.events()):
            writer.writerow(
                [q, _fmt(event.time), EventKind(event.kind).name.lower(),
                 event.origin + 1 if event.origin >= 0 else "",
                 event.dest + 1 if event.dest >= 0 else "",
                 int(rejected)]
            )
    finally:
        if should_close:
            out.close()
    return 0


def _write_json(path: str, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="fleetsim", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario JSON file")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--seed", type=int, default=0, help="64-bit master seed")
        p.add_argument("--horizon", type=float, default=None, help="simulated time units")

    p = sub.add_parser("simulate", help="run nominal sample paths")
    common(p)
    p.add_argument("--controller", default=None, help="none|static|time|event, comma list, or 'all'")
    p.add_argument("--params", default=None, help="controller parameter JSON file")
    p.add_argument("--theta", default=None, help="inline fill levels, comma separated")
    p.add_argument("--omega", type=float, default=None, help="inline trigger (period or threshold)")
    p.add_argument("--fleet", default=None, help="comma list of fleet sizes")
    p.add_argument("--runs", type=int, default=1, help="independent seeds per point")
    p.add_argument("--format", choices=["csv"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="search controller parameters")
    common(p)
    p.add_argument("--search", choices=["greedy", "random"], default="random")
    p.add_argument("--params", default=None, help="starting vector for greedy search")
    p.add_argument("--schedule", default=None, help="JSON schedule [{T, L, K}, ...]")
    p.add_argument("--ce-mode", choices=["sc", "variant"], default="variant")
    p.add_argument("--trace-out", default=None, help="per-evaluation CSV path")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("exact", help="exact and analytic reports")
    p.add_argument("what", choices=["lower-bound", "ctmc", "analytic", "dp", "cardinality"])
    common(p, config_required=False)
    p.add_argument("--fleet", dest="fleet_n", type=int, default=None)
    p.add_argument("--regions", type=int, default=None, help="cardinality: region count")
    p.add_argument("--send12", type=float, default=0.0, help="ctmc: empty-dispatch rate 1->2")
    p.add_argument("--send21", type=float, default=0.0, help="ctmc: empty-dispatch rate 2->1")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("fictitious", help="fictitious-event bounds and observations")
    common(p)
    p.add_argument("--fleet", dest="fleet_n", type=int, default=None)
    p.add_argument("--ce-mode", choices=["sc", "variant", "both"], default="both")
    p.add_argument("--runs", type=int, default=1)
    p.set_defaults(func=cmd_fictitious)

    p = sub.add_parser("trace", help="event trace of one nominal path")
    common(p)
    p.add_argument("--controller", default=None)
    p.add_argument("--params", default=None)
    p.add_argument("--theta", default=None)
    p.add_argument("--omega", type=float, default=None)
    p.set_defaults(func=cmd_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"fleetsim: config error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
        print(f"fleetsim: numeric failure: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
