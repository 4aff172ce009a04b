"""Probe / Probe_Ack validity check gating RREP forwarding.

A node holding an RREP broadcasts a ttl-2 probe naming the (source,
destination, request) triple.  One-hop neighbors relay it outward and relay
the answers back; two-hop recipients answer with tag 1 iff they sent or
forwarded that RREP.  After ``ack_window`` the collected answers are judged by
:func:`evaluate`.
"""
from __future__ import annotations

import enum
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .keying import KeyTable, derive_local_key
from .routing import RrepPacket, Triple, forward_rrep

if TYPE_CHECKING:
    from .engine import Simulation

AckSet = dict[int, dict[int, int]]  # responder -> relay -> tag


class VerdictKind(str, enum.Enum):
    VALID = "Valid"
    NO_FORWARDER = "IllegalNoForwarder"
    KEY_MISMATCH = "IllegalKeyMismatch"
    TAG_CONFLICT = "IllegalTagConflict"
    MULTIPLE_FORWARDERS = "IllegalMultipleForwarders"

    def __str__(self) -> str:
        return self.value

    @property
    def illegal(self) -> bool:
        return self is not VerdictKind.VALID


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    single_relay_responders: frozenset[int] = frozenset()
    tag_sum: int | None = None
    local_key: int | None = None


@dataclass(frozen=True)
class ProbeMsg:
    origin: int
    source: int
    destination: int
    request_id: int
    ttl: int = 2
    relay: int | None = None

    kind = "PROBE"

    @property
    def triple(self) -> Triple:
        return (self.source, self.destination, self.request_id)

    def describe(self) -> str:
        return (f"PROBE origin={self.origin} src={self.source} dst={self.destination} "
                f"req={self.request_id} ttl={self.ttl} relay={self.relay}")


@dataclass(frozen=True)
class ProbeAck:
    responder: int
    tag: int
    relay: int
    origin: int
    source: int
    destination: int
    request_id: int

    kind = "PROBE_ACK"

    @property
    def triple(self) -> Triple:
        return (self.source, self.destination, self.request_id)

    def describe(self) -> str:
        return (f"PROBE_ACK responder={self.responder} tag={self.tag} relay={self.relay} "
                f"origin={self.origin} req={self.request_id}")


def evaluate(acks: Mapping[int, Mapping[int, int]], master: int, provisioned: int) -> Verdict:
    """Judge a closed ack window.

    Precedence: conflicting tags for one responder across relays, then the
    tag sum (0 and >1 are illegal), then the local key recomputed over every
    responder must equal the provisioned key.
    """
    single = frozenset(i for i, by_relay in acks.items() if len(by_relay) == 1)
    if any(len(set(by_relay.values())) > 1 for by_relay in acks.values()):
        return Verdict(VerdictKind.TAG_CONFLICT, single)
    tag_sum = sum(next(iter(by_relay.values())) for by_relay in acks.values() if by_relay)
    if tag_sum == 0:
        return Verdict(VerdictKind.NO_FORWARDER, single, tag_sum)
    if tag_sum > 1:
        return Verdict(VerdictKind.MULTIPLE_FORWARDERS, single, tag_sum)
    lk = derive_local_key(master, acks.keys())
    kind = VerdictKind.VALID if lk == provisioned else VerdictKind.KEY_MISMATCH
    return Verdict(kind, single, tag_sum, lk)


def evaluate_at(node: int, acks: Mapping[int, Mapping[int, int]], keys: KeyTable) -> Verdict:
    return evaluate(acks, keys.master(node), keys.provisioned(node))


@dataclass
class CheckState:
    node: int
    rrep: RrepPacket
    started: float
    acks: AckSet = field(default_factory=dict)
    last_ack: float | None = None
    open: bool = True

    def merge(self, ack: ProbeAck) -> None:
        self.acks.setdefault(ack.responder, {})[ack.relay] = ack.tag


@dataclass
class PreventionState:
    checks: dict[tuple[int, Triple], CheckState] = field(default_factory=dict)
    relayed: dict[int, set[tuple[int, Triple]]] = field(default_factory=dict)
    answered: dict[int, set[tuple[int, Triple, int]]] = field(default_factory=dict)


def start_check(sim: Simulation, node: int, rrep: RrepPacket) -> None:
    st = sim.prevention
    key = (node, rrep.triple)
    st.checks[key] = CheckState(node, rrep, sim.now)
    sim.log(node, "CHECK", f"start src={rrep.source} dst={rrep.destination} req={rrep.request_id}")
    sim.broadcast(node, ProbeMsg(node, *rrep.triple, ttl=2))
    sim.schedule_timer(sim.cfg.ack_window, close_check, node, rrep.triple)


def handle_probe(sim: Simulation, node: int, probe: ProbeMsg) -> None:
    """Honest probe handling: relay when one hop out, answer when two hops out."""
    if node == probe.origin:
        return
    st = sim.prevention
    pid = (probe.origin, probe.triple)
    relayed = st.relayed.setdefault(node, set())
    if pid in relayed:
        return
    if probe.ttl - 1 > 0:
        relayed.add(pid)
        sim.broadcast(node, ProbeMsg(probe.origin, *probe.triple, ttl=probe.ttl - 1, relay=node))
        return
    if probe.relay is None:
        return
    answer_probe(sim, node, probe)


def answer_probe(sim: Simulation, node: int, probe: ProbeMsg) -> ProbeAck | None:
    answered = sim.prevention.answered.setdefault(node, set())
    tag_key = (probe.origin, probe.triple, probe.relay)
    if tag_key in answered:
        return None
    answered.add(tag_key)
    tag = 1 if sim.routing.has_forwarded(node, *probe.triple) else 0
    ack = ProbeAck(node, tag, probe.relay, probe.origin, *probe.triple)
    sim.unicast(node, probe.relay, ack)
    return ack


def handle_ack(sim: Simulation, node: int, ack: ProbeAck) -> None:
    if node == ack.origin:
        collect_ack(sim, node, ack)
    elif node == ack.relay:
        sim.unicast(node, ack.origin, ack)
    else:
        sim.log(node, "DROP", f"misaddressed {ack.describe()}")


def collect_ack(sim: Simulation, node: int, ack: ProbeAck) -> None:
    check = sim.prevention.checks.get((node, ack.triple))
    if check is None or not check.open:
        sim.log(node, "LATE_ACK", ack.describe())
        return
    check.merge(ack)
    check.last_ack = sim.now


def close_check(sim: Simulation, node: int, triple: Triple) -> None:
    check = sim.prevention.checks[(node, triple)]
    check.open = False
    verdict = evaluate_at(node, check.acks, sim.keys)
    collection = 0.0 if check.last_ack is None else check.last_ack - check.started
    sim.metrics.probe_ack_collection_times.append(round(collection, 9))
    sim.metrics.verdicts.append((node, verdict.kind.value))
    acks_txt = " ".join(
        f"{i}:" + "/".join(f"{j}={t}" for j, t in sorted(by.items()))
        for i, by in sorted(check.acks.items())
    )
    sim.log(node, "VERDICT", f"{verdict.kind} acks=[{acks_txt}] "
                             f"single_relay={sorted(verdict.single_relay_responders)}")
    if verdict.kind.illegal:
        sim.alarm(node, verdict.kind, triple)
    else:
        forward_rrep(sim, node, check.rrep)
