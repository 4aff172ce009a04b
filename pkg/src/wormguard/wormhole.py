"""Out-of-band wormhole: two colluding endpoints joined by a private tunnel.

Endpoints otherwise look like ordinary nodes to their radio neighbors: they
flood RREQs and relay probes locally, but never run a validity check.  What
differs per mode is what crosses the tunnel and under which identity.

* ``hidden_passive`` - the tunnel exit replays packets verbatim (original
  forwarder id, hop count not bumped), so the far side sees fake neighbors.
  Probe traffic never crosses the tunnel and endpoints never answer probes.
* ``exposed_passive`` - the exit re-emits under its own id and the tunnel
  counts as one ordinary hop.  Probes do cross
  the tunnel and the far endpoint answers them honestly.
* ``hidden_active`` - routing as ``hidden_passive``; when relaying probe
  answers locally, an endpoint flips one tag-0 answer (lowest responder id)
  to 1.
"""
from __future__ import annotations

import enum
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from . import prevention
from .errors import ScenarioError
from .prevention import ProbeAck, ProbeMsg
from .routing import RreqPacket, RrepPacket
from .topology import Topology

if TYPE_CHECKING:
    from .engine import Simulation


class Mode(str, enum.Enum):
    HIDDEN_PASSIVE = "hidden_passive"
    EXPOSED_PASSIVE = "exposed_passive"
    HIDDEN_ACTIVE = "hidden_active"

    def __str__(self) -> str:
        return self.value

    @property
    def hidden(self) -> bool:
        return self is not Mode.EXPOSED_PASSIVE


@dataclass(frozen=True)
class WormholeLink:
    end_a: int
    end_b: int
    mode: Mode = Mode.HIDDEN_PASSIVE
    tunnel_delay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.end_a == self.end_b:
            raise ScenarioError("wormhole endpoints must differ")
        if self.tunnel_delay < 0:
            raise ScenarioError("tunnel_delay must be >= 0")

    def partner(self, end: int) -> int:
        return self.end_b if end == self.end_a else self.end_a


@dataclass(frozen=True)
class Intercepted:
    """A unicast captured by an endpoint on its way to a fake neighbor."""

    pkt: RrepPacket | ProbeAck
    target: int

    @property
    def kind(self) -> str:
        return self.pkt.kind

    def describe(self) -> str:
        return f"INTERCEPT to={self.target} {self.pkt.describe()}"


@dataclass
class WormholeState:
    ends: dict[int, WormholeLink] = field(default_factory=dict)
    tamper_buffer: dict[tuple[int, int, tuple], list[ProbeAck]] = field(default_factory=dict)
    tampered: set[tuple[int, int, tuple]] = field(default_factory=set)

    def is_endpoint(self, n: int) -> bool:
        return n in self.ends

    def partner(self, n: int) -> int:
        return self.ends[n].partner(n)

    def mode(self, n: int) -> Mode:
        return self.ends[n].mode


def validate_links(topo: Topology, links: Iterable[WormholeLink]) -> list[WormholeLink]:
    links = list(links)
    used: set[int] = set()
    for link in links:
        for end in (link.end_a, link.end_b):
            if end not in topo:
                raise ScenarioError(f"wormhole endpoint {end} is not in the topology")
            if end in used:
                raise ScenarioError(f"node {end} is an endpoint of more than one wormhole")
            used.add(end)
        if link.end_b in topo.one_hop(link.end_a):
            raise ScenarioError(
                f"wormhole endpoints {link.end_a} and {link.end_b} are already neighbors")
    return links


def inject(sim: Simulation, link: WormholeLink) -> None:
    validate_links(sim.topo, [link])
    for end in (link.end_a, link.end_b):
        if sim.wormholes.is_endpoint(end):
            raise ScenarioError(f"node {end} is an endpoint of more than one wormhole")
    sim.wormholes.ends[link.end_a] = link
    sim.wormholes.ends[link.end_b] = link
    sim.log(link.end_a, "WORMHOLE", f"link {link.end_a}<->{link.end_b} mode={link.mode} "
                                    f"delay={link.tunnel_delay}")


def find_intercept(sim: Simulation, frm: int, to: int) -> int | None:
    """Endpoint next to ``frm`` whose partner can reach ``to`` (lowest id wins)."""
    ws = sim.wormholes
    for end in sorted(sim.topo.one_hop(frm)):
        if ws.is_endpoint(end):
            far = ws.partner(end)
            if to == far or to in sim.topo.one_hop(far):
                return end
    return None


def on_receive(sim: Simulation, node: int, pkt, via_tunnel: bool) -> None:
    """Dispatch a packet arriving at wormhole endpoint ``node``."""
    if isinstance(pkt, Intercepted):
        _on_intercepted(sim, node, pkt, via_tunnel)
    elif isinstance(pkt, RreqPacket):
        _on_rreq(sim, node, pkt, via_tunnel)
    elif isinstance(pkt, RrepPacket):
        _on_rrep(sim, node, pkt, via_tunnel)
    elif isinstance(pkt, ProbeMsg):
        wormhole_probe_behavior(sim, node, pkt, via_tunnel)
    elif isinstance(pkt, ProbeAck):
        _on_ack(sim, node, pkt, via_tunnel)


def _on_rreq(sim: Simulation, node: int, pkt: RreqPacket, via_tunnel: bool) -> None:
    st = sim.routing
    ws = sim.wormholes
    mode = ws.mode(node)
    if not st.first_sight(node, pkt):
        sim.log(node, "DROP", f"duplicate {pkt.describe()}")
        return
    triple = (pkt.source, pkt.destination, pkt.request_id)
    if via_tunnel:
        st.routes.setdefault(node, {})[triple] = ws.partner(node)
        out = pkt if mode.hidden else replace(pkt, hop_count=pkt.hop_count + 1,
                                              path_predecessor=node)
        sim.broadcast(node, out)
        return
    st.routes.setdefault(node, {})[triple] = pkt.path_predecessor
    own = replace(pkt, hop_count=pkt.hop_count + 1, path_predecessor=node)
    sim.broadcast(node, own)
    sim.tunnel(node, pkt if mode.hidden else own)


def _on_rrep(sim: Simulation, node: int, pkt: RrepPacket, via_tunnel: bool) -> None:
    st = sim.routing
    ws = sim.wormholes
    mode = ws.mode(node)
    triple = pkt.triple
    nxt = st.routes.get(node, {}).get(triple)
    if nxt is None:
        sim.log(node, "WARN", f"no reverse path for {pkt.describe()}")
        return
    st.log_forward(node, triple)
    sim.note_rrep_progress(node)
    path = pkt.path + (node,)
    if nxt == ws.partner(node):
        out = replace(pkt, path=path) if mode.hidden else replace(
            pkt, forwarder=node, hop_count=pkt.hop_count + 1, path=path)
        sim.tunnel(node, out)
    elif via_tunnel:
        out = replace(pkt, path=path) if mode.hidden else replace(
            pkt, forwarder=node, hop_count=pkt.hop_count + 1, path=path)
        sim.unicast(node, nxt, out)
    else:
        sim.unicast(node, nxt, replace(pkt, forwarder=node, hop_count=pkt.hop_count + 1,
                                       path=path))


def _on_intercepted(sim: Simulation, node: int, wrapped: Intercepted, via_tunnel: bool) -> None:
    pkt = wrapped.pkt
    if isinstance(pkt, RrepPacket):
        sim.routing.log_forward(node, pkt.triple)
        sim.note_rrep_progress(node)
        pkt = replace(pkt, path=pkt.path + (node,))
    if via_tunnel and wrapped.target == node:
        on_receive(sim, node, pkt, via_tunnel=True)
    elif via_tunnel:
        sim.unicast(node, wrapped.target, pkt)
    else:
        sim.tunnel(node, Intercepted(pkt, wrapped.target))


def wormhole_probe_behavior(sim: Simulation, node: int, probe: ProbeMsg, via_tunnel: bool) -> None:
    """Probe handling at an endpoint, per attack mode."""
    ws = sim.wormholes
    mode = ws.mode(node)
    if node == probe.origin:
        return
    pid = (probe.origin, probe.triple)
    relayed = sim.prevention.relayed.setdefault(node, set())
    if pid in relayed:
        return
    if via_tunnel:
        # only exposed endpoints ever forward probes into the tunnel
        prevention.answer_probe(sim, node, probe)
        return
    if probe.ttl - 1 > 0:
        relayed.add(pid)
        out = ProbeMsg(probe.origin, *probe.triple, ttl=probe.ttl - 1, relay=node)
        sim.broadcast(node, out)
        if mode is Mode.EXPOSED_PASSIVE:
            sim.tunnel(node, out)
        return
    if mode is Mode.EXPOSED_PASSIVE and probe.relay is not None:
        prevention.answer_probe(sim, node, probe)
    else:
        sim.log(node, "DROP", f"silent endpoint {probe.describe()}")


def _on_ack(sim: Simulation, node: int, ack: ProbeAck, via_tunnel: bool) -> None:
    ws = sim.wormholes
    if node != ack.relay:
        sim.log(node, "DROP", f"misaddressed {ack.describe()}")
        return
    if ws.mode(node) is not Mode.HIDDEN_ACTIVE:
        sim.unicast(node, ack.origin, ack)
        return
    key = (node, ack.origin, ack.triple)
    buf = ws.tamper_buffer.setdefault(key, [])
    if not buf:
        sim.schedule_timer(0.0, _flush_tampered, key)
    buf.append(ack)


def _flush_tampered(sim: Simulation, key) -> None:
    ws = sim.wormholes
    node = key[0]
    acks = ws.tamper_buffer.pop(key, [])
    victim = None
    if key not in ws.tampered:
        zeros = [a.responder for a in acks if a.tag == 0]
        if zeros:
            victim = min(zeros)
            ws.tampered.add(key)
    for ack in acks:
        if ack.responder == victim:
            ack = replace(ack, tag=1)
            sim.log(node, "TAMPER", f"flip responder={ack.responder} origin={ack.origin}")
        sim.unicast(node, ack.origin, ack)
