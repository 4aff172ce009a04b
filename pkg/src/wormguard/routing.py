"""Simplified AODV route discovery: RREQ flood, reverse-path RREP, forward log.

Handlers take the running :class:`~wormguard.engine.Simulation` as their first
argument and only touch its routing state, its send methods and the RREP
check gate ``sim.start_check``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .engine import Simulation

Triple = tuple[int, int, int]  # (source, destination, request_id)


@dataclass(frozen=True)
class RreqPacket:
    source: int
    destination: int
    request_id: int
    hop_count: int  # hops from source to the node that transmitted this copy
    path_predecessor: int

    kind = "RREQ"

    def describe(self) -> str:
        return (f"RREQ src={self.source} dst={self.destination} req={self.request_id} "
                f"hop={self.hop_count} pred={self.path_predecessor}")


@dataclass(frozen=True)
class RrepPacket:
    source: int
    destination: int
    request_id: int
    forwarder: int
    hop_count: int = 0  # hops from destination to ``forwarder``
    path: tuple[int, ...] = ()  # physical transmitters so far; diagnostics only

    kind = "RREP"

    @property
    def triple(self) -> Triple:
        return (self.source, self.destination, self.request_id)

    def describe(self) -> str:
        return (f"RREP src={self.source} dst={self.destination} req={self.request_id} "
                f"hop={self.hop_count} fwd={self.forwarder}")


@dataclass
class RoutingState:
    seen: dict[int, set[tuple[int, int]]] = field(default_factory=dict)
    routes: dict[int, dict[Triple, int]] = field(default_factory=dict)
    forward_log: dict[int, set[Triple]] = field(default_factory=dict)
    rreq_tx: int = 0
    next_request_id: int = 1

    def first_sight(self, node: int, pkt: RreqPacket) -> bool:
        seen = self.seen.setdefault(node, set())
        key = (pkt.source, pkt.request_id)
        if key in seen:
            return False
        seen.add(key)
        return True

    def log_forward(self, node: int, triple: Triple) -> None:
        self.forward_log.setdefault(node, set()).add(triple)

    def has_forwarded(self, node: int, source: int, destination: int, request_id: int) -> bool:
        return (source, destination, request_id) in self.forward_log.get(node, ())

    def forwarders(self, triple: Triple) -> set[int]:
        return {n for n, log in self.forward_log.items() if triple in log}


def start_discovery(sim: Simulation, source: int, destination: int) -> int:
    st = sim.routing
    rid = st.next_request_id
    st.next_request_id += 1
    st.seen.setdefault(source, set()).add((source, rid))
    sim.log(source, "DISCOVER", f"src={source} dst={destination} req={rid}")
    sim.broadcast(source, RreqPacket(source, destination, rid, 0, source))
    return rid


def handle_rreq(sim: Simulation, node: int, pkt: RreqPacket) -> None:
    st = sim.routing
    if not st.first_sight(node, pkt):
        sim.log(node, "DROP", f"duplicate {pkt.describe()}")
        return
    triple = (pkt.source, pkt.destination, pkt.request_id)
    st.routes.setdefault(node, {})[triple] = pkt.path_predecessor
    if node == pkt.destination:
        sim.metrics.destination_hops = pkt.hop_count + 1
        st.log_forward(node, triple)
        rrep = RrepPacket(*triple, forwarder=node, hop_count=0, path=(node,))
        sim.note_rrep_progress(node)
        sim.unicast(node, pkt.path_predecessor, rrep)
        return
    st.rreq_tx += 1
    sim.broadcast(node, replace(pkt, hop_count=pkt.hop_count + 1, path_predecessor=node))


def handle_rrep(sim: Simulation, node: int, pkt: RrepPacket) -> None:
    st = sim.routing
    triple = pkt.triple
    if node != pkt.source:
        if triple not in st.routes.get(node, {}):
            sim.log(node, "WARN", f"no reverse path for {pkt.describe()}")
            return
        st.log_forward(node, triple)
    if not sim.cfg.prevention_enabled or _exempt(sim, node, pkt):
        forward_rrep(sim, node, pkt)
    else:
        sim.start_check(node, pkt)


def _exempt(sim: Simulation, node: int, pkt: RrepPacket) -> bool:
    # The node's provisioned neighbor table backs the "came from the destination" shortcut.
    return pkt.forwarder == pkt.destination and pkt.destination in sim.topo.one_hop(node)


def forward_rrep(sim: Simulation, node: int, pkt: RrepPacket) -> None:
    """Release an RREP at ``node``: establish the route at the source, else send it on."""
    if node == pkt.source:
        sim.route_established(pkt)
        return
    nxt = sim.routing.routes[node][pkt.triple]
    sim.note_rrep_progress(node)
    sim.unicast(node, nxt, replace(pkt, forwarder=node, hop_count=pkt.hop_count + 1,
                                   path=pkt.path + (node,)))


def has_forwarded(sim: Simulation, node: int, source: int, destination: int, request_id: int) -> bool:
    return sim.routing.has_forwarded(node, source, destination, request_id)
