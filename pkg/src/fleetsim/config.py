"""Configuration files and the bundled six-region benchmark.

JSON schema::

    {
      "N": 6, "m": 75, "w": 0.5, "horizon": 100000.0,
      "intervals": [
        {"length": 100000.0, "lambda": [[...]], "mu": [[...]]}
      ],
      "controller": {"mode": "event", "theta": [...], "omega": 8}
    }

Request rates may be given either as an N x N ``lambda`` matrix or as a
``lambda_vec`` of per-region totals plus a row-stochastic routing matrix
``p``; the latter is normalized to ``lambda[i][j] = lambda_vec[i] * p[i][j]``
at load time.  All rates are per minute; horizons and interval lengths are
minutes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .control import ControlParams, StaticRates
from .model import IntervalParams, SystemConfig

__all__ = [
    "load_config",
    "dump_config",
    "load_control_params",
    "dump_control_params",
    "load_static_rates",
    "dump_static_rates",
    "six_region_benchmark",
    "BENCHMARK_EVENT_PARAMS",
    "BENCHMARK_TIME_PERIODS",
    "published_search_schedule",
]


class ConfigError(ValueError):
    """Raised for malformed configuration files."""


# Six-region benchmark tables as published (demands and completions per
# HOUR; see bench/README.md).  Working configurations are per minute, so
# the benchmark constructor divides by 60: trips then last 5-25 minutes
# and the published dispatch periods / static rates are minutes-consistent.
BENCHMARK_REQUEST_RATES = [
    [6, 15, 6, 6, 9, 3],
    [3, 6, 3, 6, 6, 12],
    [0, 9, 3, 0, 3, 3],
    [6, 3, 0, 6, 3, 0],
    [6, 12, 6, 0, 3, 0],
    [6, 18, 3, 3, 6, 6],
]
BENCHMARK_TRAVEL_RATES = [
    [12, 9.6, 4.8, 8.4, 2.4, 3.6],
    [9.6, 12, 7.2, 6, 3.6, 4.8],
    [4.8, 7.2, 12, 4.8, 3.6, 9.6],
    [8.4, 6, 4.8, 12, 2.4, 2.4],
    [2.4, 3.6, 3.6, 2.4, 12, 8.4],
    [3.6, 4.8, 9.6, 2.4, 8.4, 12],
]

# Tuned controller parameters per fleet size (fill levels + trigger).
BENCHMARK_EVENT_PARAMS = {
    50: ([10, 7, 4, 1, 4, 7], 5),
    75: ([15, 13, 8, 4, 12, 13], 8),
    100: ([20, 16, 11, 7, 16, 20], 14),
    125: ([27, 19, 13, 7, 19, 25], 22),
}
# Tuned dispatch periods of the time-driven controller per fleet size.
BENCHMARK_TIME_PERIODS = {50: 24.0, 75: 12.0, 100: 12.0, 125: 18.0}


def six_region_benchmark(fleet_size: int = 75, horizon: float = 100_000.0, weight: float = 0.5) -> SystemConfig:
    """The six-region benchmark scenario.

    Single interval; the published hourly rate tables converted to
    per-minute; horizon in minutes.
    """
    return SystemConfig(
        n_regions=6,
        fleet_size=fleet_size,
        intervals=[
            IntervalParams(
                request_rates=np.array(BENCHMARK_REQUEST_RATES, dtype=float) / 60.0,
                travel_rates=np.array(BENCHMARK_TRAVEL_RATES, dtype=float) / 60.0,
            )
        ],
        interval_length=horizon,
        weight=weight,
        horizon=horizon,
    )


def published_search_schedule():
    """The published random-search schedule: (horizon, paths, batches) rows."""
    from .tuner import SearchSchedule

    rows = []
    for horizon, paths in [(500.0, 25), (500.0, 25), (500.0, 25),
                           (5000.0, 50), (5000.0, 50), (5000.0, 50),
                           (10000.0, 100), (10000.0, 100), (10000.0, 100),
                           (10000.0, 200), (10000.0, 200), (10000.0, 200),
                           (10000.0, 500), (10000.0, 500), (10000.0, 500)]:
        rows.append((horizon, paths, 25))
    return SearchSchedule(rows)


def _rates_from_interval(entry: dict, where: str) -> np.ndarray:
    if "lambda" in entry:
        return np.asarray(entry["lambda"], dtype=float)
    if "lambda_vec" in entry and "p" in entry:
        vec = np.asarray(entry["lambda_vec"], dtype=float)
        routing = np.asarray(entry["p"], dtype=float)
        if routing.ndim != 2 or routing.shape[0] != routing.shape[1] or routing.shape[0] != vec.shape[0]:
            raise ConfigError(f"{where}: 'p' must be square and match 'lambda_vec'")
        if np.any(routing < 0):
            raise ConfigError(f"{where}: routing probabilities must be nonnegative")
        rowsums = routing.sum(axis=1)
        if np.any(np.abs(rowsums - 1.0) > 1e-9):
            raise ConfigError(f"{where}: routing matrix rows must sum to 1")
        return vec[:, None] * routing
    raise ConfigError(f"{where}: provide either 'lambda' or 'lambda_vec' + 'p'")


def load_config(path: str | Path) -> tuple[SystemConfig, ControlParams | None]:
    """Load a scenario file; returns the config and its controller, if any."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return parse_config(raw, origin=str(path))


def parse_config(raw: dict, origin: str = "<config>") -> tuple[SystemConfig, ControlParams | None]:
    for key in ("N", "m", "w", "horizon", "intervals"):
        if key not in raw:
            raise ConfigError(f"{origin}: missing required key {key!r}")
    interval_entries = raw["intervals"]
    if not isinstance(interval_entries, list) or not interval_entries:
        raise ConfigError(f"{origin}: 'intervals' must be a non-empty list")
    lengths = []
    intervals = []
    for idx, entry in enumerate(interval_entries):
        where = f"{origin}: intervals[{idx}]"
        if "length" not in entry:
            raise ConfigError(f"{where}: missing 'length'")
        lengths.append(float(entry["length"]))
        if "mu" not in entry:
            raise ConfigError(f"{where}: missing 'mu'")
        try:
            intervals.append(
                IntervalParams(
                    request_rates=_rates_from_interval(entry, where),
                    travel_rates=np.asarray(entry["mu"], dtype=float),
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    if len(set(lengths)) > 1:
        raise ConfigError(f"{origin}: intervals must share a common length")
    try:
        config = SystemConfig(
            n_regions=int(raw["N"]),
            fleet_size=int(raw["m"]),
            intervals=intervals,
            interval_length=lengths[0],
            weight=float(raw["w"]),
            horizon=float(raw["horizon"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    controller = None
    if raw.get("controller") is not None:
        controller = _parse_controller(raw["controller"], origin)
        try:
            controller.validate(config.n_regions, config.fleet_size, config.n_intervals)
        except ValueError as exc:
            raise ConfigError(f"{origin}: controller: {exc}") from exc
    return config, controller


def _parse_controller(raw: dict, origin: str) -> ControlParams:
    for key in ("mode", "theta", "omega"):
        if key not in raw:
            raise ConfigError(f"{origin}: controller: missing {key!r}")
    try:
        return ControlParams(
            mode=str(raw["mode"]),
            fill_levels=np.asarray(raw["theta"], dtype=np.int64),
            trigger=float(raw["omega"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: controller: {exc}") from exc


def dump_config(config: SystemConfig, controller: ControlParams | None = None) -> dict:
    """Serialize a scenario back to the JSON schema (round-trip identity)."""
    doc = {
        "N": config.n_regions,
        "m": config.fleet_size,
        "w": config.weight,
        "horizon": config.horizon,
        "intervals": [
            {
                "length": config.interval_length,
                "lambda": iv.request_rates.tolist(),
                "mu": iv.travel_rates.tolist(),
            }
            for iv in config.intervals
        ],
    }
    if controller is not None:
        doc["controller"] = dump_control_params(controller)
    return doc


def dump_control_params(params: ControlParams) -> dict:
    omega = params.trigger
    return {
        "mode": params.mode,
        "theta": params.fill_levels.tolist(),
        "omega": int(omega) if float(omega).is_integer() and params.mode == "event" else float(omega),
    }


def load_control_params(path: str | Path) -> ControlParams:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    return _parse_controller(raw, str(path))


def dump_static_rates(rates: StaticRates) -> dict:
    return {"mode": "static", "rates": rates.rates.tolist()}


def load_static_rates(path: str | Path) -> StaticRates:
    path = Path(path)
    raw = json.loads(path.read_text())
    if "rates" not in raw:
        raise ConfigError(f"{path}: missing 'rates'")
    try:
        return StaticRates(rates=np.asarray(raw["rates"], dtype=float))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
