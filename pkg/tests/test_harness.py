from __future__ import annotations

import csv
import statistics
from pathlib import Path

import pytest

from wormguard import ScenarioConfig, fixture, run
from wormguard.cli import main
from wormguard.engine import EXIT_DETECTED, EXIT_ERROR, EXIT_ESTABLISHED, EXIT_TIMEOUT
from wormguard.scenario import (
    ScenarioFileError, dumps_scenario, load_experiment, load_scenario, loads_scenario,
)
from wormguard.wormhole import Mode, WormholeLink

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

GOLDEN_HEADERS = {
    "metrics": "outcome,route_established,rrep_total_time,rrep_phase_time,total_energy,"
               "rrep_phase_energy,max_collection_time,checks,alarms,false_positive_count,"
               "detection_count,route_hops,honest_distance,source,destination,route",
    "compare": "hop,node,baseline_time,prevention_time,baseline_energy,prevention_energy",
    "summary": "baseline_rrep_time,prevention_rrep_time,baseline_energy,prevention_energy,"
               "max_collection_time",
    "runs": "name,seed,node_count,source,destination,honest_distance,baseline_route_hops,"
            "baseline_outcome,prevention_outcome,baseline_rrep_time,prevention_rrep_time,"
            "baseline_energy,prevention_energy,max_collection_time,checks,alarms",
    "aggregate": "name,runs,established_baseline,established_prevention,detected,"
                 "mean_baseline_rrep_time,mean_prevention_rrep_time,mean_baseline_energy,"
                 "mean_prevention_energy,max_collection_time",
    "by_hops": "name,honest_distance,runs,mean_baseline_rrep_time,mean_prevention_rrep_time,"
               "mean_baseline_energy,mean_prevention_energy",
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def header(path):
    return Path(path).read_text().splitlines()[0]


# --- scenario files --------------------------------------------------------

def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.toml"
    p.write_text("")
    assert load_scenario(p) == ScenarioConfig()


def test_negative_range_names_the_field():
    with pytest.raises(ScenarioFileError, match="range"):
        loads_scenario("range = -5\n")


@pytest.mark.parametrize("text,fragment", [
    ("seed = 1\nnode_count = \n", ":2"),
    ("seed = 1\n\n[broken\n", ":3"),
])
def test_parse_errors_carry_line_numbers(text, fragment):
    with pytest.raises(ScenarioFileError) as exc:
        loads_scenario(text, "s.toml")
    assert fragment in str(exc.value) and exc.value.line is not None


@pytest.mark.parametrize("text,field", [
    ("colour = 3\n", "colour"),
    ("seed = 1.5\n", "seed"),
    ("prevention_enabled = 1\n", "prevention_enabled"),
    ('random_wormhole_mode = "loud"\n', "random_wormhole_mode"),
    ("wormholes = [{a = 1}]\n", "wormholes[0]"),
    ('wormholes = [{a = 1, b = 2, mode = "odd"}]\n', "wormholes[0]"),
    ("area = [1.0]\n", "area"),
    ("positions = [[0, 1.0]]\n", "positions"),
])
def test_validation_errors_name_the_field(text, field):
    with pytest.raises(ScenarioFileError) as exc:
        loads_scenario(text)
    assert exc.value.__cause__.field == field


@pytest.mark.parametrize("cfg", [
    ScenarioConfig(),
    ScenarioConfig(seed=4, node_count=12, hop_delay=0.02, sim_time_limit=2.5, loss_prob=0.1,
                   random_wormholes=2, random_wormhole_mode=Mode.EXPOSED_PASSIVE),
    fixture.config(Mode.HIDDEN_ACTIVE),
    fixture.config().with_(wormholes=(WormholeLink(2, 11, Mode.EXPOSED_PASSIVE, 0.25),
                                      WormholeLink(3, 9))),
])
def test_dump_load_roundtrip(cfg):
    assert loads_scenario(dumps_scenario(cfg)) == cfg


def test_shipped_scenarios_load_and_roundtrip():
    files = sorted(p for p in SCENARIOS.glob("*.toml") if not p.name.startswith("sweep"))
    assert len(files) >= 6
    for path in files:
        cfg = load_scenario(path)
        assert loads_scenario(dumps_scenario(cfg)) == cfg


def test_fixture_scenario_file_matches_module():
    for mode in Mode:
        assert load_scenario(SCENARIOS / f"fixture_{mode.value}.toml") == fixture.config(mode)
    assert load_scenario(SCENARIOS / "fixture_clean.toml") == fixture.config()


def test_experiment_file(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text('output_dir = "out"\nrepetitions = 2\n'
                 '[[experiment]]\nname = "b"\nseed = 10\n'
                 '[[experiment]]\nname = "a"\nrepetitions = 3\nnode_count = 12\n')
    experiment = load_experiment(p)
    assert experiment.output_dir == tmp_path / "out"
    assert [(n, c.seed) for n, c in experiment.jobs()] == [("a", 0), ("a", 1), ("a", 2),
                                                     ("b", 10), ("b", 11)]


@pytest.mark.parametrize("body,fragment", [
    ("", "experiment"),
    ('[[experiment]]\nname = "x"\n[[experiment]]\nname = "x"\n', "duplicate"),
    ('[[experiment]]\nname = "x"\nrepetitions = 0\n', "repetitions"),
    ("[[experiment]]\nseed = 1\n", "name"),
])
def test_bad_experiment_files(tmp_path, body, fragment):
    p = tmp_path / "exp.toml"
    p.write_text(body)
    with pytest.raises(ScenarioFileError, match=fragment):
        load_experiment(p)


# --- CLI ---------------------------------------------------------------------

def test_cli_fixtures(capsys):
    assert main(["fixtures"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [l.split()[-1] for l in lines] == ["Valid", "IllegalNoForwarder",
                                             "IllegalKeyMismatch", "IllegalTagConflict"]


@pytest.mark.parametrize("name,status", [
    ("fixture_clean", EXIT_ESTABLISHED),
    ("fixture_hidden_passive", EXIT_DETECTED),
    ("fixture_exposed_passive", EXIT_DETECTED),
    ("fixture_hidden_active", EXIT_DETECTED),
])
def test_cli_run(tmp_path, capsys, name, status):
    assert main(["run", str(SCENARIOS / f"{name}.toml"), "--out", str(tmp_path)]) == status
    assert header(tmp_path / f"{name}_metrics.csv") == GOLDEN_HEADERS["metrics"]
    trace = (tmp_path / f"{name}.trace").read_text()
    assert trace == run(load_scenario(SCENARIOS / f"{name}.toml")).trace_text
    assert "outcome" in capsys.readouterr().out


def test_cli_run_timeout(tmp_path):
    p = tmp_path / "far.toml"
    p.write_text("positions = [[0, 0.0, 0.0], [1, 50.0, 0.0]]\nrange = 10.0\n"
                 "source = 0\ndestination = 1\n")
    assert main(["run", str(p), "--out", str(tmp_path)]) == EXIT_TIMEOUT


def test_cli_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("WORMGUARD_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(SCENARIOS / "fixture_clean.toml")]) == 0
    assert (tmp_path / "env" / "fixture_clean.trace").exists()


def test_cli_missing_file(capsys):
    assert main(["run", "/nonexistent/nowhere.toml"]) == EXIT_ERROR
    assert "nowhere.toml" in capsys.readouterr().err


def test_cli_bad_flag():
    with pytest.raises(SystemExit) as exc:
        main(["run"])
    assert exc.value.code != 0


def test_cli_compare(tmp_path):
    assert main(["compare", str(SCENARIOS / "random30.toml"), "--out", str(tmp_path)]) == 0
    assert header(tmp_path / "random30_compare.csv") == GOLDEN_HEADERS["compare"]
    assert header(tmp_path / "random30_summary.csv") == GOLDEN_HEADERS["summary"]
    rows = read_csv(tmp_path / "random30_compare.csv")
    assert rows
    for row in rows:
        assert float(row["prevention_time"]) >= float(row["baseline_time"])
        assert float(row["prevention_energy"]) >= float(row["baseline_energy"])


def test_cli_sweep(tmp_path):
    exp = tmp_path / "exp.toml"
    exp.write_text('output_dir = "res"\nrepetitions = 3\n'
                   '[[experiment]]\nname = "small"\nnode_count = 15\n'
                   '[[experiment]]\nname = "attacked"\nrandom_wormholes = 3\n'
                   'random_wormhole_mode = "hidden_passive"\n')
    assert main(["sweep", str(exp), "--jobs", "2"]) == 0
    out = tmp_path / "res"
    for name in ("runs", "aggregate", "by_hops"):
        assert header(out / f"{name}.csv") == GOLDEN_HEADERS[name]
    runs = read_csv(out / "runs.csv")
    assert [(r["name"], int(r["seed"])) for r in runs] == \
        [("attacked", s) for s in range(3)] + [("small", s) for s in range(3)]

    # serial run gives identical files
    assert main(["sweep", str(exp), "--out", str(tmp_path / "serial")]) == 0
    for name in ("runs", "aggregate", "by_hops"):
        assert (out / f"{name}.csv").read_text() == (tmp_path / "serial" / f"{name}.csv").read_text()

    # aggregate rows are the mean / max of metrics recomputed from fresh runs
    agg = {r["name"]: r for r in read_csv(out / "aggregate.csv")}
    experiment = load_experiment(exp)
    for name in ("attacked", "small"):
        cfgs = [c for n, c in experiment.jobs() if n == name]
        base = [run(c.with_(prevention_enabled=False)).metrics for c in cfgs]
        prev = [run(c.with_(prevention_enabled=True)).metrics for c in cfgs]
        row = agg[name]
        assert int(row["runs"]) == 3
        assert float(row["mean_baseline_energy"]) == pytest.approx(
            statistics.fmean(m.total_energy for m in base), abs=1e-6)
        assert float(row["mean_prevention_rrep_time"]) == pytest.approx(
            statistics.fmean(m.rrep_total_time for m in prev), abs=1e-6)
        assert float(row["max_collection_time"]) == pytest.approx(
            max(m.max_collection_time for m in prev), abs=1e-6)
        assert int(row["detected"]) == sum(m.outcome == "detected" for m in prev)


def test_shipped_experiment_files_parse():
    for path in SCENARIOS.glob("sweep_*.toml"):
        experiment = load_experiment(path)
        assert len(experiment.jobs()) >= 20
