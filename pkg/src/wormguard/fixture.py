"""The hand-placed 15-node A-O scenario and its four canonical checks.

Coordinates are chosen so that, with a 100 m range, the graph is::

    D - A - B - C - F - I - M - O - N - L
            |       |   |   |
            E ------+   J   K
            |           |
            H           G

(E-F is an edge; C and E are both one hop from B.)  This gives
two_hop(I) = {C, E, G, K, O} and two_hop(B) = {D, F, H}.  The clean route
A -> O is A-B-C-F-I-M-O; the wormhole is C <-> L.
"""
from __future__ import annotations

from dataclasses import dataclass

from .engine import RunResult, ScenarioConfig, run
from .prevention import VerdictKind
from .wormhole import Mode, WormholeLink

NAMES = "ABCDEFGHIJKLMNO"
ID = {name: k for k, name in enumerate(NAMES)}
RANGE = 100.0

COORDS = {
    "A": (50.0, 200.0),
    "B": (140.0, 200.0),
    "C": (210.0, 260.0),
    "D": (50.0, 110.0),
    "E": (210.0, 140.0),
    "F": (280.0, 200.0),
    "G": (370.0, 380.0),
    "H": (210.0, 50.0),
    "I": (370.0, 200.0),
    "J": (370.0, 290.0),
    "K": (460.0, 110.0),
    "L": (550.0, 380.0),
    "M": (460.0, 200.0),
    "N": (550.0, 290.0),
    "O": (550.0, 200.0),
}

POSITIONS = tuple((ID[n], x, y) for n, (x, y) in COORDS.items())


def name(n: int) -> str:
    return NAMES[n] if 0 <= n < len(NAMES) else str(n)


def config(mode: Mode | None = None, **overrides) -> ScenarioConfig:
    links = () if mode is None else (WormholeLink(ID["C"], ID["L"], mode),)
    base = dict(positions=POSITIONS, range=RANGE, source=ID["A"], destination=ID["O"],
                wormholes=links, prevention_enabled=True)
    base.update(overrides)
    return ScenarioConfig(**base)


@dataclass(frozen=True)
class FixtureCase:
    label: str
    mode: Mode | None
    checker: str
    expected: VerdictKind


CASES = (
    FixtureCase("no wormhole", None, "I", VerdictKind.VALID),
    FixtureCase("hidden passive", Mode.HIDDEN_PASSIVE, "B", VerdictKind.NO_FORWARDER),
    FixtureCase("exposed passive", Mode.EXPOSED_PASSIVE, "B", VerdictKind.KEY_MISMATCH),
    FixtureCase("hidden active", Mode.HIDDEN_ACTIVE, "B", VerdictKind.TAG_CONFLICT),
)


def verdict_at(result: RunResult, checker: str) -> str | None:
    for node, kind in result.metrics.verdicts:
        if node == ID[checker]:
            return kind
    return None


def run_case(case: FixtureCase) -> tuple[str | None, RunResult]:
    result = run(config(case.mode))
    return verdict_at(result, case.checker), result
