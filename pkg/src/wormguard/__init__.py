"""Wormhole-resistant route discovery simulator for wireless sensor networks."""
from .engine import (
    EnergyLedger,
    Metrics,
    RunResult,
    ScenarioConfig,
    Simulation,
    measure_overhead,
    run,
    simulate,
)
from .keying import KeyTable, derive_key, derive_local_key, provision
from .prevention import Verdict, VerdictKind, evaluate
from .scenario import dumps_scenario, load_experiment, load_scenario
from .topology import Topology, build_topology, one_hop, random_topology, two_hop
from .wormhole import Mode, WormholeLink

__all__ = [
    "EnergyLedger", "KeyTable", "Metrics", "Mode", "RunResult", "ScenarioConfig",
    "Simulation", "Topology", "Verdict", "VerdictKind", "WormholeLink",
    "build_topology", "derive_key", "derive_local_key", "dumps_scenario", "evaluate",
    "load_experiment", "load_scenario", "measure_overhead", "one_hop", "provision",
    "random_topology", "run", "simulate", "two_hop",
]
