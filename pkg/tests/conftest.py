from __future__ import annotations

import networkx as nx
import pytest

from wormguard import fixture
from wormguard.prevention import VerdictKind
from wormguard.topology import Topology, build_topology, random_topology

CORPUS_SEEDS = range(100)


def nx_graph(topo: Topology) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(topo.ids)
    for a in topo.ids:
        g.add_edges_from((a, b) for b in topo.one_hop(a))
    return g


def oracle_two_hop(topo: Topology) -> dict[int, frozenset[int]]:
    """Exact-distance-2 sets from networkx BFS."""
    g = nx_graph(topo)
    return {
        n: frozenset(m for m, d in nx.single_source_shortest_path_length(g, n, cutoff=2).items()
                     if d == 2)
        for n in g
    }


def fixture_topology() -> Topology:
    return build_topology([(i, (x, y)) for i, x, y in fixture.POSITIONS], fixture.RANGE)


def corpus() -> list[tuple[str, Topology]]:
    """Every graph of <= 30 nodes the suite checks against the oracle."""
    graphs = [("fixture", fixture_topology())]
    graphs += [(f"random{s}", random_topology(s)) for s in CORPUS_SEEDS]
    graphs += [(f"sparse{s}", random_topology(s, n=20, range=150)) for s in range(20)]
    graphs += [("line", build_topology({k: (10.0 * k, 0.0) for k in range(8)}, 10.0))]
    return graphs


@pytest.fixture(scope="session")
def graph_corpus():
    return corpus()


M64 = (1 << 64) - 1


def ref_mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
    return z ^ (z >> 31)


def ref_derive(master: int, ids) -> int:
    """Plain-integer reference for the key fold."""
    acc = master & M64
    for i in sorted(set(ids)):
        acc = ref_mix64(acc ^ i)
    return acc


def fields_of(line: str) -> list[str]:
    return line.split(" | ")


# Computed once from ``ref_derive``; frozen so a regression in either
# implementation shows up.
KEY_VECTORS = [
    (0, [1], 0x5692161D100B05E5),
    (0, [], 0x0),
    (0xDEADBEEFCAFEBABE, [], 0xDEADBEEFCAFEBABE),
    (0, [1, 2, 3], 0xA55BDF37C08724B5),
    (12345, [5, 3], 0x15FF1956B034180A),
    (M64, [0], 0xB4D055FCF2CBBD7B),
    (0x0123456789ABCDEF, [2, 4, 6, 10, 14], 0x30C101101A72CD04),
    (42, list(range(30)), 0xE373A4E983D2860B),
]

# Per-responder ack patterns: relay -> tag.  Relays 1 and 2 are arbitrary ids.
PATTERNS = [
    {1: 0}, {1: 1},
    {1: 0, 2: 0}, {1: 1, 2: 1},
    {1: 0, 2: 1}, {1: 1, 2: 0},
]


def oracle_verdict(acks, provisioned_set) -> VerdictKind:
    """Independent restatement of the verdict rules (set equality stands in for keys)."""
    for by_relay in acks.values():
        if 0 in by_relay.values() and 1 in by_relay.values():
            return VerdictKind.TAG_CONFLICT
    ones = [r for r, by_relay in acks.items() if 1 in by_relay.values()]
    if not ones:
        return VerdictKind.NO_FORWARDER
    if len(ones) > 1:
        return VerdictKind.MULTIPLE_FORWARDERS
    if set(acks) == set(provisioned_set):
        return VerdictKind.VALID
    return VerdictKind.KEY_MISMATCH


# Acceptance lines collected during the run and echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
