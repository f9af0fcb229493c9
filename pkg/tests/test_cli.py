"""Command-line driver: schemas, round-trips, exit codes, golden outputs."""

import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from fleetsim.cli import main
from fleetsim.config import dump_config, load_config, parse_config, six_region_benchmark

BENCH = str(Path(__file__).resolve().parents[1] / "bench" / "n6.json")
GOLDEN = Path(__file__).resolve().parent / "golden"


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def small_doc():
    return {
        "N": 2,
        "m": 3,
        "w": 0.5,
        "horizon": 200.0,
        "intervals": [
            {"length": 200.0, "lambda": [[0.3, 0.8], [0.2, 0.1]], "mu": [[1.0, 0.7], [0.9, 1.2]]}
        ],
        "controller": {"mode": "event", "theta": [2, 1], "omega": 1},
    }


def test_config_round_trip_identity(tmp_path):
    doc = small_doc()
    path = write_config(tmp_path, doc)
    config, controller = load_config(path)
    assert dump_config(config, controller) == doc
    # and the shipped benchmark round-trips too
    config, controller = load_config(BENCH)
    redumped = dump_config(config, controller)
    assert redumped == json.loads(Path(BENCH).read_text())


def test_bench_file_matches_constructor():
    config, controller = load_config(BENCH)
    reference = six_region_benchmark(75)
    assert np.array_equal(config.intervals[0].request_rates, reference.intervals[0].request_rates)
    assert np.array_equal(config.intervals[0].travel_rates, reference.intervals[0].travel_rates)
    assert config.fleet_size == reference.fleet_size
    assert controller.mode == "event"
    assert controller.fill_levels.tolist() == [15, 13, 8, 4, 12, 13]
    assert controller.trigger == 8


def test_rate_normalization_from_vector_form(tmp_path):
    doc = small_doc()
    doc["intervals"][0].pop("lambda")
    doc["intervals"][0]["lambda_vec"] = [1.1, 0.3]
    doc["intervals"][0]["p"] = [[0.25, 0.75], [0.5, 0.5]]
    config, _ = load_config(write_config(tmp_path, doc))
    expected = np.array([[0.275, 0.825], [0.15, 0.15]])
    assert np.allclose(config.intervals[0].request_rates, expected, atol=1e-12)


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--no-such-flag"])
    assert exc.value.code == 1


def test_missing_config_is_config_error(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"N": 2,\n  "m": }')
    assert main(["simulate", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "broken.json:2" in err


def test_invalid_rates_rejected(tmp_path, capsys):
    doc = small_doc()
    doc["intervals"][0]["mu"][0][1] = 0.0
    assert main(["simulate", "--config", write_config(tmp_path, doc)]) == 2
    assert "travel rates" in capsys.readouterr().err


def test_simulate_schema_and_reproducibility(tmp_path, capsys):
    path = write_config(tmp_path, small_doc())
    args = ["simulate", "--config", path, "--controller", "none,event", "--runs", "2", "--seed", "7"]
    assert main(args) == 0
    first = capsys.readouterr().out
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["m", "controller", "w", "T", "seed", "pct_rejected", "pct_empty", "J"]
    assert len(rows) == 1 + 4
    assert {r[1] for r in rows[1:]} == {"none", "event"}
    for row in rows[1:]:
        assert 0.0 <= float(row[-1]) <= 1.0
    assert main(args) == 0
    assert capsys.readouterr().out == first


def test_simulate_fleet_sweep(tmp_path, capsys):
    path = write_config(tmp_path, small_doc())
    assert main(["simulate", "--config", path, "--controller", "none", "--fleet", "2,4"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))[1:]
    assert [r[0] for r in rows] == ["2", "4"]


def test_exact_lower_bound_report(tmp_path):
    out = tmp_path / "lb.json"
    assert main(["exact", "lower-bound", "--config", BENCH, "--fleet", "75", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert payload["pct_rejected"] == pytest.approx(0.0, abs=1e-7)
    assert payload["pct_empty"] == pytest.approx(6.79, abs=0.01)
    assert payload["value"] == pytest.approx(0.0339, abs=1e-4)


def test_exact_cardinality(capsys):
    assert main(["exact", "cardinality", "--regions", "6", "--fleet", "50"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert int(payload["states"]) > 3 * 10**34
    assert main(["exact", "cardinality", "--regions", "2", "--fleet", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["states"] == "8"


def test_exact_dp_unsupported_for_larger_systems(tmp_path, capsys):
    doc = small_doc()  # two regions but three vehicles
    assert main(["exact", "dp", "--config", write_config(tmp_path, doc)]) == 2
    err = capsys.readouterr().err
    assert "memory" in err
    assert "120" in err  # state count for N=2, m=3


def test_exact_dp_small_system(tmp_path, capsys):
    doc = small_doc()
    doc["m"] = 1
    doc["controller"] = None
    assert main(["exact", "dp", "--config", write_config(tmp_path, doc)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload["policy"].values()) <= {"idle", "dispatch"}
    assert payload["average_cost"] > 0


def test_exact_ctmc_and_analytic(tmp_path, capsys):
    doc = small_doc()
    doc["controller"] = None
    path = write_config(tmp_path, doc)
    assert main(["exact", "ctmc", "--config", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert sum(payload["pi"]) == pytest.approx(1.0, abs=1e-9)
    assert main(["exact", "analytic", "--config", path]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["coefficients"]["num_cross"] == pytest.approx(2 * payload["coefficients"]["den_cross"])
    assert payload["policy"] in ([0, 0], [0, "inf"], ["inf", 0])


def test_fictitious_report(capsys):
    assert main(["fictitious", "--config", BENCH, "--horizon", "300", "--runs", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    sc = payload["modes"]["sc"]
    assert sc["bound_min_pct"] == pytest.approx(93.91, abs=0.01)
    assert sc["bound_max_pct"] == pytest.approx(98.96, abs=0.01)
    for value in sc["observed_pct"]:
        assert sc["bound_min_pct"] - 1e-9 <= value <= sc["bound_max_pct"] + 1e-9
    variant = payload["modes"]["variant"]
    assert variant["bound_max_pct"] == pytest.approx(82.87, abs=0.01)
    for value in variant["observed_pct"]:
        assert 0.0 <= value <= variant["bound_max_pct"]


def test_trace_golden_file(tmp_path):
    out = tmp_path / "trace.csv"
    assert main([
        "trace", "--config", BENCH, "--controller", "event",
        "--horizon", "2.5", "--seed", "12345", "--out", str(out),
    ]) == 0
    golden = GOLDEN / "trace_bench_event.csv"
    produced = out.read_text()
    rows = list(csv.reader(io.StringIO(produced)))
    assert rows[0] == ["q", "tau", "kind", "i", "j", "rejected"]
    times = [float(r[1]) for r in rows[1:]]
    assert times == sorted(times)
    if not golden.exists():  # pragma: no cover - first-run generation
        golden.parent.mkdir(exist_ok=True)
        golden.write_text(produced)
    assert produced == golden.read_text()


def test_tune_greedy_small(tmp_path):
    doc = small_doc()
    path = write_config(tmp_path, doc)
    out = tmp_path / "best.json"
    trace = tmp_path / "trace.csv"
    assert main([
        "tune", "--config", path, "--search", "greedy", "--horizon", "100",
        "--seed", "3", "--out", str(out), "--trace-out", str(trace),
    ]) == 0
    payload = json.loads(out.read_text())
    assert payload["mode"] == "event"
    assert len(payload["theta"]) == 2
    header = trace.read_text().splitlines()[0].split(",")
    assert header == ["step", "theta_1", "theta_2", "omega", "J_estimate", "moved"]


def test_tune_random_small(tmp_path):
    doc = small_doc()
    path = write_config(tmp_path, doc)
    schedule = tmp_path / "schedule.json"
    schedule.write_text(json.dumps([{"T": 50, "L": 4, "K": 2}, {"T": 100, "L": 4, "K": 2}]))
    out = tmp_path / "best.json"
    trace = tmp_path / "trace.csv"
    assert main([
        "tune", "--config", path, "--search", "random", "--schedule", str(schedule),
        "--seed", "4", "--out", str(out), "--trace-out", str(trace),
    ]) == 0
    payload = json.loads(out.read_text())
    assert "final_bounds" in payload
    rows = list(csv.reader(io.StringIO(trace.read_text())))
    assert rows[0] == ["iteration", "batch", "theta_1", "theta_2", "omega", "J_estimate", "T", "seed"]
    assert len(rows) == 1 + 2 * 2 * 4


def test_parse_config_requires_fields():
    from fleetsim.config import ConfigError

    with pytest.raises(ConfigError):
        parse_config({"N": 2})


def test_simulate_no_demand_reports_zero_metrics(tmp_path, capsys):
    doc = small_doc()
    doc["intervals"][0]["lambda"] = [[0.0, 0.0], [0.0, 0.0]]
    doc["controller"] = None
    path = write_config(tmp_path, doc)
    assert main(["simulate", "--config", path, "--controller", "none"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert [rows[1][5], rows[1][6], rows[1][7]] == ["0", "0", "0"]


def test_time_varying_config_rejected_for_ce_commands(tmp_path, capsys):
    doc = small_doc()
    doc["horizon"] = 400.0
    doc["intervals"] = doc["intervals"] * 2
    path = write_config(tmp_path, doc)
    assert main(["fictitious", "--config", path, "--horizon", "50"]) == 2
    assert "time-invariant" in capsys.readouterr().err
    assert main(["tune", "--config", path, "--search", "greedy", "--horizon", "50"]) == 2


def test_static_rates_file_round_trip(tmp_path, capsys):
    from fleetsim.config import dump_static_rates, load_static_rates
    from fleetsim.control import static_rates

    config, _ = load_config(BENCH)
    rates = static_rates(config)
    path = tmp_path / "static.json"
    path.write_text(json.dumps(dump_static_rates(rates)))
    loaded = load_static_rates(path)
    assert np.allclose(loaded.rates, rates.rates)
    assert main([
        "simulate", "--config", BENCH, "--controller", "static",
        "--params", str(path), "--horizon", "200",
    ]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[1][1] == "static"


def test_time_controller_defaults(tmp_path, capsys):
    # non-benchmark configs fall back to even fill levels at the half-hour
    # period; the benchmark picks its tuned period per fleet size
    doc = small_doc()
    doc["horizon"] = 300.0
    doc["controller"] = None
    path = write_config(tmp_path, doc)
    assert main(["simulate", "--config", path, "--controller", "time", "--horizon", "120"]) == 0
    assert capsys.readouterr().out.count("\n") == 2
    assert main(["trace", "--config", BENCH, "--controller", "time", "--horizon", "30", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    # tuned benchmark period for 75 vehicles: ticks every 12 minutes
    tick_times = [float(r.split(",")[1]) for r in out.splitlines()[1:] if ",timeout," in r]
    assert tick_times == [12.0, 24.0]
