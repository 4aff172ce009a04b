"""Scenario and experiment files (TOML) plus CSV emitters.

Scenario keys mirror :class:`~wormguard.engine.ScenarioConfig`; a missing key
takes its default.  Two extras: ``topology_file`` (a ``range``/``id x y``
node list, relative to the scenario file) as an alternative to inline
``positions``, and ``wormholes`` as a list of ``{a, b, mode, delay}`` tables.
"""
from __future__ import annotations

import csv
import io
import json
import os
import re
import statistics
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import topology
from .engine import Metrics, OverheadComparison, ScenarioConfig, measure_overhead
from .errors import ConfigError, WormguardError
from .wormhole import Mode, WormholeLink

OUTPUT_DIR_ENV = "WORMGUARD_OUTPUT_DIR"

_SCALARS = {
    "seed": int, "node_count": int, "random_wormholes": int,
    "range": float, "hop_delay": float, "ack_window": float, "tx_cost": float,
    "rx_cost": float, "loss_prob": float, "sim_time_limit": float,
    "source": int, "destination": int,
}


class ScenarioFileError(WormguardError):
    def __init__(self, path, message: str, line: int | None = None):
        where = f"{path}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


def _number(field: str, value, kind):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    if kind is int and not float(value).is_integer():
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return kind(value)


def _wormhole(entry, k: int) -> WormholeLink:
    field = f"wormholes[{k}]"
    if not isinstance(entry, Mapping):
        raise ConfigError(field, "expected a table {a, b, mode, delay}")
    unknown = set(entry) - {"a", "b", "mode", "delay"}
    if unknown:
        raise ConfigError(field, f"unknown key(s) {sorted(unknown)}")
    try:
        return WormholeLink(
            _number(f"{field}.a", entry["a"], int),
            _number(f"{field}.b", entry["b"], int),
            Mode(entry.get("mode", Mode.HIDDEN_PASSIVE.value)),
            _number(f"{field}.delay", entry.get("delay", 0.0), float),
        )
    except KeyError as exc:
        raise ConfigError(field, f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from None
    except WormguardError as exc:
        raise ConfigError(field, str(exc)) from None


def config_from_mapping(data: Mapping, base_dir: Path | None = None) -> ScenarioConfig:
    """Validate a parsed key/value mapping and apply defaults."""
    known = {f.name for f in fields(ScenarioConfig)} | {"topology_file"}
    kwargs: dict = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(key, "unknown scenario key")
        if key in _SCALARS:
            kwargs[key] = _number(key, value, _SCALARS[key])
        elif key == "prevention_enabled":
            if not isinstance(value, bool):
                raise ConfigError(key, f"expected true/false, got {value!r}")
            kwargs[key] = value
        elif key == "area":
            if not (isinstance(value, list) and len(value) == 2):
                raise ConfigError(key, "expected [width, height]")
            kwargs[key] = tuple(_number(key, v, float) for v in value)
        elif key == "random_wormhole_mode":
            try:
                kwargs[key] = Mode(value)
            except ValueError:
                raise ConfigError(key, f"unknown mode {value!r}") from None
        elif key == "wormholes":
            if not isinstance(value, list):
                raise ConfigError(key, "expected a list of tables")
            kwargs[key] = tuple(_wormhole(e, k) for k, e in enumerate(value))
        elif key == "positions":
            if not isinstance(value, list) or not all(
                    isinstance(p, list) and len(p) == 3 for p in value):
                raise ConfigError(key, "expected a list of [id, x, y]")
            kwargs[key] = tuple((_number(key, i, int), _number(key, x, float),
                                 _number(key, y, float)) for i, x, y in value)
        elif key == "topology_file":
            if "positions" in data:
                raise ConfigError(key, "give either positions or topology_file, not both")
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            try:
                topo = topology.load(path)
            except (OSError, WormguardError) as exc:
                raise ConfigError(key, str(exc)) from None
            kwargs["positions"] = tuple((n, x, y) for n, (x, y) in sorted(topo.nodes.items()))
            kwargs.setdefault("range", topo.range)
    if "range" in data:
        kwargs["range"] = _number("range", data["range"], float)
    return ScenarioConfig(**kwargs)


def _parse_toml(text: str, path) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioFileError(path, str(exc), int(m.group(1)) if m else None) from None


def loads_scenario(text: str, path="<string>", base_dir: Path | None = None) -> ScenarioConfig:
    data = _parse_toml(text, path)
    try:
        return config_from_mapping(data, base_dir)
    except ConfigError as exc:
        raise ScenarioFileError(path, str(exc)) from exc


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(path, f"cannot read scenario file ({exc.strerror})") from None
    return loads_scenario(text, path, path.parent)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot encode {v!r}")


def dumps_scenario(cfg: ScenarioConfig) -> str:
    lines = []
    for f in fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "wormholes":
            tables = [f"{{a = {w.end_a}, b = {w.end_b}, mode = \"{w.mode.value}\", "
                      f"delay = {w.tunnel_delay!r}}}" for w in v]
            lines.append(f"wormholes = [{', '.join(tables)}]")
        elif f.name == "random_wormhole_mode":
            lines.append(f"{f.name} = \"{v.value}\"")
        else:
            lines.append(f"{f.name} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

METRICS_COLUMNS = (
    "outcome", "route_established", "rrep_total_time", "rrep_phase_time", "total_energy",
    "rrep_phase_energy", "max_collection_time", "checks", "alarms", "false_positive_count",
    "detection_count", "route_hops", "honest_distance", "source", "destination", "route",
)

COMPARE_COLUMNS = (
    "hop", "node", "baseline_time", "prevention_time", "baseline_energy", "prevention_energy",
)

SUMMARY_COLUMNS = (
    "baseline_rrep_time", "prevention_rrep_time", "baseline_energy", "prevention_energy",
    "max_collection_time",
)

SWEEP_RUN_COLUMNS = (
    "name", "seed", "node_count", "source", "destination", "honest_distance",
    "baseline_route_hops", "baseline_outcome", "prevention_outcome",
    "baseline_rrep_time", "prevention_rrep_time", "baseline_energy", "prevention_energy",
    "max_collection_time", "checks", "alarms",
)

SWEEP_AGG_COLUMNS = (
    "name", "runs", "established_baseline", "established_prevention", "detected",
    "mean_baseline_rrep_time", "mean_prevention_rrep_time", "mean_baseline_energy",
    "mean_prevention_energy", "max_collection_time",
)

SWEEP_HOPS_COLUMNS = (
    "name", "honest_distance", "runs", "mean_baseline_rrep_time", "mean_prevention_rrep_time",
    "mean_baseline_energy", "mean_prevention_energy",
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return f"{v:.6f}"
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


def write_csv(rows: Iterable[Mapping], columns: tuple[str, ...], path: str | Path | None = None
              ) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def metrics_row(m: Metrics) -> dict:
    return {
        "outcome": m.outcome, "route_established": m.route_established,
        "rrep_total_time": m.rrep_total_time, "rrep_phase_time": m.rrep_phase_time,
        "total_energy": m.total_energy, "rrep_phase_energy": m.rrep_phase_energy,
        "max_collection_time": m.max_collection_time, "checks": len(m.verdicts),
        "alarms": len(m.alarms), "false_positive_count": m.false_positive_count,
        "detection_count": m.detection_count, "route_hops": m.route_hops,
        "honest_distance": m.honest_distance, "source": m.source,
        "destination": m.destination, "route": m.route,
    }


def compare_rows(cmp: OverheadComparison) -> list[dict]:
    return [
        {"hop": r.hop, "node": r.node_prevention, "baseline_time": r.baseline_time,
         "prevention_time": r.prevention_time, "baseline_energy": r.baseline_energy,
         "prevention_energy": r.prevention_energy}
        for r in cmp.rows
    ]


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    entries: tuple[tuple[str, ScenarioConfig, int], ...]  # (name, config, repetitions)
    output_dir: Path

    def jobs(self) -> list[tuple[str, ScenarioConfig]]:
        out = []
        for name, cfg, reps in sorted(self.entries, key=lambda e: e[0]):
            out += [(name, cfg.with_(seed=cfg.seed + k)) for k in range(reps)]
        return out


def load_experiment(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioFileError(path, f"cannot read experiment file ({exc.strerror})") from None
    data = _parse_toml(text, path)
    try:
        default_reps = _number("repetitions", data.get("repetitions", 1), int)
        out = Path(os.environ.get(OUTPUT_DIR_ENV) or data.get("output_dir", "."))
        if not out.is_absolute() and OUTPUT_DIR_ENV not in os.environ:
            out = path.parent / out
        raw = data.get("experiment")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("experiment", "need at least one [[experiment]] table")
        entries, names = [], set()
        for k, exp in enumerate(raw):
            exp = dict(exp)
            name = exp.pop("name", None)
            if not isinstance(name, str) or not name:
                raise ConfigError(f"experiment[{k}].name", "missing or empty")
            if name in names:
                raise ConfigError(f"experiment[{k}].name", f"duplicate name {name!r}")
            names.add(name)
            reps = _number(f"{name}.repetitions", exp.pop("repetitions", default_reps), int)
            if reps < 1:
                raise ConfigError(f"{name}.repetitions", "must be >= 1")
            exp.pop("prevention_enabled", None)
            entries.append((name, config_from_mapping(exp, path.parent), reps))
    except ConfigError as exc:
        raise ScenarioFileError(path, str(exc)) from exc
    return ExperimentSpec(tuple(entries), out)


def _sweep_one(job: tuple[str, ScenarioConfig]) -> dict:
    name, cfg = job
    cmp = measure_overhead(cfg.with_(prevention_enabled=False), cfg.with_(prevention_enabled=True))
    b, p = cmp.baseline.metrics, cmp.prevention.metrics
    return {
        "name": name, "seed": cfg.seed,
        "node_count": len(cfg.positions) if cfg.positions else cfg.node_count,
        "source": p.source, "destination": p.destination, "honest_distance": p.honest_distance,
        "baseline_route_hops": b.route_hops, "baseline_outcome": b.outcome,
        "prevention_outcome": p.outcome,
        "baseline_rrep_time": b.rrep_total_time, "prevention_rrep_time": p.rrep_total_time,
        "baseline_energy": b.total_energy, "prevention_energy": p.total_energy,
        "max_collection_time": p.max_collection_time, "checks": len(p.verdicts),
        "alarms": len(p.alarms),
    }


def run_sweep(experiment: ExperimentSpec, jobs: int = 1) -> list[dict]:
    """Every (name, seed) pair as a baseline/prevention pair, ordered by name then seed."""
    work = experiment.jobs()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, work))
    else:
        rows = [_sweep_one(j) for j in work]
    return sorted(rows, key=lambda r: (r["name"], r["seed"]))


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return statistics.fmean(vals) if vals else None


def aggregate(rows: list[dict]) -> list[dict]:
    out = []
    for name in sorted({r["name"] for r in rows}):
        group = [r for r in rows if r["name"] == name]
        out.append({
            "name": name, "runs": len(group),
            "established_baseline": sum(r["baseline_outcome"] == "established" for r in group),
            "established_prevention": sum(r["prevention_outcome"] == "established" for r in group),
            "detected": sum(r["prevention_outcome"] == "detected" for r in group),
            "mean_baseline_rrep_time": _mean(r["baseline_rrep_time"] for r in group),
            "mean_prevention_rrep_time": _mean(r["prevention_rrep_time"] for r in group),
            "mean_baseline_energy": _mean(r["baseline_energy"] for r in group),
            "mean_prevention_energy": _mean(r["prevention_energy"] for r in group),
            "max_collection_time": max(r["max_collection_time"] for r in group),
        })
    return out


def aggregate_by_hops(rows: list[dict]) -> list[dict]:
    out = []
    keys = sorted({(r["name"], r["honest_distance"]) for r in rows
                   if r["honest_distance"] is not None})
    for name, hops in keys:
        group = [r for r in rows if r["name"] == name and r["honest_distance"] == hops]
        out.append({
            "name": name, "honest_distance": hops, "runs": len(group),
            "mean_baseline_rrep_time": _mean(r["baseline_rrep_time"] for r in group),
            "mean_prevention_rrep_time": _mean(r["prevention_rrep_time"] for r in group),
            "mean_baseline_energy": _mean(r["baseline_energy"] for r in group),
            "mean_prevention_energy": _mean(r["prevention_energy"] for r in group),
        })
    return out
