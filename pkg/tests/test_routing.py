from __future__ import annotations

from collections import Counter

import pytest

from conftest import nx_graph
from wormguard import ScenarioConfig, fixture, run
from wormguard.engine import build_simulation
from wormguard.topology import random_topology

import networkx as nx

ID = fixture.ID


def line_config(n: int, **kw) -> ScenarioConfig:
    return ScenarioConfig(positions=[(k, 10.0 * k, 0.0) for k in range(n)], range=10.0,
                          source=0, destination=n - 1, **kw)


def trace_kinds(result, kind):
    return [line.split(" | ") for line in result.trace if line.split(" | ")[2] == kind]


def test_three_node_line():
    r = run(line_config(3, prevention_enabled=False))
    assert r.metrics.route == [0, 1, 2]
    assert r.metrics.route_established


@pytest.mark.parametrize("n", [2, 3, 5, 9])
@pytest.mark.parametrize("h", [0.01, 0.25])
def test_line_timing_closed_form(n, h):
    hops = n - 1
    m = run(line_config(n, prevention_enabled=False, hop_delay=h)).metrics
    assert m.rrep_total_time == pytest.approx(2 * hops * h, abs=1e-9)
    assert m.rrep_phase_time == pytest.approx(hops * h, abs=1e-9)
    assert m.route_hops == hops


def test_disconnected_pair_times_out():
    cfg = ScenarioConfig(positions=[(0, 0, 0), (1, 5, 0), (2, 100, 0)], range=10.0,
                         source=0, destination=2)
    m = run(cfg).metrics
    assert m.outcome == "timeout" and not m.route_established and m.route is None
    assert m.rrep_total_time == cfg.time_limit


def test_fixture_route_is_shortest():
    m = run(fixture.config(prevention_enabled=False)).metrics
    assert m.route == [ID[c] for c in "ABCFIMO"]
    assert m.route_hops == m.honest_distance == 6


@pytest.mark.parametrize("seed", range(40))
def test_route_hops_equal_bfs_distance(seed):
    cfg = ScenarioConfig(seed=seed, prevention_enabled=False)
    r = run(cfg)
    g = nx_graph(random_topology(seed))
    m = r.metrics
    assert m.route_hops == nx.shortest_path_length(g, m.source, m.destination)
    # every consecutive pair on the route is a real link
    assert all(g.has_edge(a, b) for a, b in zip(m.route, m.route[1:]))


@pytest.mark.parametrize("seed", range(20))
def test_rreq_flood_suppresses_duplicates(seed):
    r = run(ScenarioConfig(seed=seed, prevention_enabled=False, sim_time_limit=5.0))
    senders = Counter(f[1] for f in trace_kinds(r, "TX") if "bcast RREQ" in f[3])
    assert max(senders.values()) == 1
    assert sum(senders.values()) <= 30
    rreps = [f for f in trace_kinds(r, "TX") if "RREP" in f[3] and f[1] == str(r.metrics.destination)]
    assert len(rreps) == 1


@pytest.mark.parametrize("low,high", [(1, 2), (7, 3)])
def test_tie_goes_to_lower_predecessor(low, high):
    # diamond: source 0, two equal-length branches, destination 9
    lo = min(low, high)
    pos = [(0, 0.0, 0.0), (low, 10.0, 5.0), (high, 10.0, -5.0), (9, 20.0, 0.0)]
    cfg = ScenarioConfig(positions=pos, range=12.0, source=0, destination=9,
                         prevention_enabled=False)
    assert run(cfg).metrics.route == [0, lo, 9]


def test_forward_log_equals_rrep_path():
    sim = build_simulation(fixture.config(prevention_enabled=False))
    from wormguard import routing
    rid = routing.start_discovery(sim, sim.source, sim.destination)
    sim.run_until_done()
    triple = (sim.source, sim.destination, rid)
    assert sim.routing.forwarders(triple) == set(sim.metrics.route) - {sim.source}
    assert sim.routing.has_forwarded(ID["O"], *triple)
    assert not sim.routing.has_forwarded(ID["O"], sim.source, sim.destination, rid + 1)
    assert not sim.routing.has_forwarded(ID["K"], *triple)


def test_nothing_forwarded_before_discovery():
    sim = build_simulation(fixture.config())
    assert not any(sim.routing.has_forwarded(n, ID["A"], ID["O"], 1) for n in sim.topo.ids)


@pytest.mark.parametrize("seed", range(25))
def test_prevention_does_not_change_the_route(seed):
    off = run(ScenarioConfig(seed=seed, prevention_enabled=False)).metrics
    on = run(ScenarioConfig(seed=seed)).metrics
    assert on.route == off.route
    assert on.rrep_total_time > off.rrep_total_time


def test_destination_neighbor_forwards_without_probe():
    r = run(fixture.config())
    checks = {int(f[1]) for f in trace_kinds(r, "CHECK")}
    assert ID["M"] not in checks
    assert checks == {ID[c] for c in "ABCFI"}


def test_source_receiving_rrep_stops():
    r = run(line_config(4))
    assert r.trace[-1].split(" | ")[2] == "ROUTE"
    assert r.metrics.route == [0, 1, 2, 3]
