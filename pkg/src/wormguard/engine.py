"""Deterministic discrete-event engine: scheduler, radio delivery, energy, metrics.

Events are ordered by ``(time, rank, seq)``.  Packet deliveries use the
transmitting (or, for RREQs, the claimed predecessor) node id as rank, so two
copies arriving at the same instant are handled lowest-sender first; timers
rank after every delivery at their instant.  Times are rounded to 1e-9 so
equal hop counts give exactly equal timestamps.
"""
from __future__ import annotations

import heapq
import itertools
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import keying, prevention, routing, wormhole
from .errors import ConfigError, ScenarioError
from .prevention import ProbeAck, ProbeMsg, VerdictKind
from .routing import RreqPacket, RrepPacket, Triple
from .topology import Topology, build_topology, random_topology
from .wormhole import Intercepted, Mode, WormholeLink

TIMER_RANK = 1 << 62
BASE_TIME_LIMIT = 0.3

EXIT_ESTABLISHED = 0
EXIT_ERROR = 1
EXIT_DETECTED = 2
EXIT_TIMEOUT = 3


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    node_count: int = 30
    area: tuple[float, float] = (600.0, 600.0)
    range: float = 250.0
    hop_delay: float = 0.01
    ack_window: float = 1.0
    tx_cost: float = 2.0
    rx_cost: float = 1.0
    prevention_enabled: bool = True
    wormholes: tuple[WormholeLink, ...] = ()
    random_wormholes: int = 0
    random_wormhole_mode: Mode = Mode.HIDDEN_PASSIVE
    source: int | None = None
    destination: int | None = None
    sim_time_limit: float | None = None
    loss_prob: float = 0.0
    positions: tuple[tuple[int, float, float], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "area", tuple(float(v) for v in self.area))
        object.__setattr__(self, "wormholes", tuple(self.wormholes))
        object.__setattr__(self, "random_wormhole_mode", Mode(self.random_wormhole_mode))
        if self.positions is not None:
            object.__setattr__(self, "positions",
                               tuple((int(i), float(x), float(y)) for i, x, y in self.positions))
        self.validate()

    def validate(self) -> None:
        def positive(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(name, f"must be positive, got {v!r}")

        for name in ("range", "hop_delay"):
            positive(name)
        for name in ("ack_window", "tx_cost", "rx_cost"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v >= 0):
                raise ConfigError(name, f"must be >= 0, got {v!r}")
        if self.positions is None and self.node_count < 2:
            raise ConfigError("node_count", f"must be >= 2, got {self.node_count}")
        if len(self.area) != 2 or min(self.area) <= 0:
            raise ConfigError("area", f"must be two positive extents, got {self.area!r}")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ConfigError("loss_prob", f"must be in [0, 1), got {self.loss_prob!r}")
        if self.sim_time_limit is not None and self.sim_time_limit <= 0:
            raise ConfigError("sim_time_limit", f"must be positive, got {self.sim_time_limit!r}")
        if self.random_wormholes < 0:
            raise ConfigError("random_wormholes", "must be >= 0")
        if (self.source is None) != (self.destination is None):
            raise ConfigError("source", "source and destination must be given together")
        if self.source is not None and self.source == self.destination:
            raise ConfigError("destination", "must differ from source")

    @property
    def time_limit(self) -> float:
        """Discovery timeout; by default the base budget plus one ack window per node."""
        if self.sim_time_limit is not None:
            return self.sim_time_limit
        n = len(self.positions) if self.positions is not None else self.node_count
        return BASE_TIME_LIMIT + n * self.ack_window

    def with_(self, **changes) -> ScenarioConfig:
        return replace(self, **changes)


class EnergyLedger:
    """Per-node packet counts; consumption is counts times constant costs."""

    def __init__(self, nodes: Sequence[int], tx_cost: float, rx_cost: float):
        self.tx_cost = tx_cost
        self.rx_cost = rx_cost
        self.tx_count = {n: 0 for n in nodes}
        self.rx_count = {n: 0 for n in nodes}

    def charge_tx(self, n: int) -> None:
        self.tx_count[n] += 1

    def charge_rx(self, n: int) -> None:
        self.rx_count[n] += 1

    def consumed(self, n: int) -> float:
        return self.tx_count[n] * self.tx_cost + self.rx_count[n] * self.rx_cost

    def total(self) -> float:
        return sum(self.consumed(n) for n in self.tx_count)

    def snapshot(self) -> dict[int, float]:
        return {n: self.consumed(n) for n in sorted(self.tx_count)}


@dataclass
class Metrics:
    outcome: str = "timeout"  # established | detected | timeout
    route_established: bool = False
    rrep_total_time: float | None = None
    rrep_phase_time: float | None = None
    total_energy: float = 0.0
    rrep_phase_energy: float | None = None
    energy_snapshot: dict[int, float] = field(default_factory=dict)
    probe_ack_collection_times: list[float] = field(default_factory=list)
    verdicts: list[tuple[int, str]] = field(default_factory=list)
    alarms: list[tuple[int, str]] = field(default_factory=list)
    false_positive_count: int = 0
    detection_count: int = 0
    route: list[int] | None = None
    route_hops: int | None = None
    destination_hops: int | None = None
    honest_distance: int | None = None
    source: int = -1
    destination: int = -1
    rrep_progress: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def max_collection_time(self) -> float:
        return max(self.probe_ack_collection_times, default=0.0)

    @property
    def exit_status(self) -> int:
        return {"established": EXIT_ESTABLISHED, "detected": EXIT_DETECTED}.get(
            self.outcome, EXIT_TIMEOUT)


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: Metrics
    trace: list[str]

    @property
    def trace_text(self) -> str:
        return "\n".join(self.trace) + "\n"


class Simulation:
    def __init__(self, cfg: ScenarioConfig, topo: Topology, keys: keying.KeyTable,
                 source: int, destination: int, links: Sequence[WormholeLink] = ()):
        self.cfg = cfg
        self.topo = topo
        self.keys = keys
        self.source = source
        self.destination = destination
        self.now = 0.0
        self.stopped = False
        self.trace: list[str] = []
        self.energy = EnergyLedger(topo.ids, cfg.tx_cost, cfg.rx_cost)
        self.metrics = Metrics(source=source, destination=destination)
        self.routing = routing.RoutingState()
        self.prevention = prevention.PreventionState()
        self.wormholes = wormhole.WormholeState()
        self._heap: list = []
        self._seq = itertools.count()
        self._loss_rng = np.random.default_rng([cfg.seed, 0x105])
        self._rrep_started: tuple[float, float] | None = None
        for link in links:
            wormhole.inject(self, link)

    # -- scheduling ---------------------------------------------------------

    def _push(self, delay: float, rank: int, fn: Callable, args: tuple) -> None:
        t = round(self.now + delay, 9)
        heapq.heappush(self._heap, (t, rank, next(self._seq), fn, args))

    def schedule_timer(self, delay: float, fn: Callable, *args) -> None:
        self._push(delay, TIMER_RANK, fn, (self,) + args)

    def step(self) -> bool:
        if not self._heap or self.stopped:
            return False
        t, _, _, fn, args = heapq.heappop(self._heap)
        if t > self.cfg.time_limit:
            self.now = self.cfg.time_limit
            return False
        assert t >= self.now, "event scheduled in the past"
        self.now = t
        fn(*args)
        return True

    def run_until_done(self) -> None:
        while self.step():
            pass
        if not self.stopped:
            # the source gives up at the limit even if the network fell silent earlier
            self.now = max(self.now, self.cfg.time_limit)
            self.log(self.source, "TIMEOUT", f"no route by t={self.now:.6f}")
            self._finish("timeout")

    # -- trace ----------------------------------------------------------------

    def log(self, node: int, kind: str, details: str = "") -> None:
        self.trace.append(f"{self.now:.6f} | {node} | {kind} | {details}")

    # -- radio ----------------------------------------------------------------

    def _lost(self) -> bool:
        return self.cfg.loss_prob > 0 and self._loss_rng.random() < self.cfg.loss_prob

    def broadcast(self, frm: int, pkt) -> None:
        """One transmission heard by every one-hop neighbor after ``hop_delay``."""
        self.energy.charge_tx(frm)
        self.log(frm, "TX", f"bcast {pkt.describe()}")
        rank = pkt.path_predecessor if isinstance(pkt, RreqPacket) else frm
        for nbr in sorted(self.topo.one_hop(frm)):
            if self._lost():
                self.log(nbr, "LOST", pkt.describe())
                continue
            self._push(self.cfg.hop_delay, rank, self._deliver, (nbr, pkt, frm, False))

    def unicast(self, frm: int, to: int, pkt) -> None:
        ws = self.wormholes
        if ws.is_endpoint(frm) and to == ws.partner(frm) and to not in self.topo.one_hop(frm):
            self.tunnel(frm, pkt)
            return
        if to in self.topo.one_hop(frm):
            receiver, payload = to, pkt
        else:
            receiver = wormhole.find_intercept(self, frm, to)
            if receiver is None:
                self.log(frm, "DROP", f"unicast to non-neighbor {to}: {pkt.describe()}")
                return
            payload = Intercepted(pkt, to)
        self.energy.charge_tx(frm)
        self.log(frm, "TX", f"to={to} {pkt.describe()}")
        if self._lost():
            self.log(receiver, "LOST", pkt.describe())
            return
        self._push(self.cfg.hop_delay, frm, self._deliver, (receiver, payload, frm, False))

    def tunnel(self, frm: int, pkt) -> None:
        """Out-of-band hop to the partner endpoint; no radio energy is charged."""
        link = self.wormholes.ends[frm]
        to = link.partner(frm)
        self.log(frm, "TUNNEL", f"to={to} {pkt.describe()}")
        self._push(link.tunnel_delay, frm, self._deliver, (to, pkt, frm, True))

    def _deliver(self, node: int, pkt, frm: int, via_tunnel: bool) -> None:
        if self.stopped:
            return
        if not via_tunnel:
            self.energy.charge_rx(node)
        self.log(node, "RX", f"from={frm}{' tunnel' if via_tunnel else ''} {pkt.describe()}")
        if self.wormholes.is_endpoint(node):
            wormhole.on_receive(self, node, pkt, via_tunnel)
        elif isinstance(pkt, RreqPacket):
            routing.handle_rreq(self, node, pkt)
        elif isinstance(pkt, RrepPacket):
            routing.handle_rrep(self, node, pkt)
        elif isinstance(pkt, ProbeMsg):
            prevention.handle_probe(self, node, pkt)
        elif isinstance(pkt, ProbeAck):
            prevention.handle_ack(self, node, pkt)
        elif isinstance(pkt, Intercepted):
            self.log(node, "DROP", f"not an endpoint: {pkt.describe()}")

    # -- protocol hooks ---------------------------------------------------------

    def start_check(self, node: int, rrep: RrepPacket) -> None:
        prevention.start_check(self, node, rrep)

    def note_rrep_progress(self, node: int) -> None:
        if self._rrep_started is None:
            self._rrep_started = (self.now, self.energy.total())
        self.metrics.rrep_progress.append((node, self.now, self.energy.total()))

    def route_established(self, pkt: RrepPacket) -> None:
        m = self.metrics
        m.route = [self.source] + list(reversed(pkt.path))
        m.route_hops = pkt.hop_count + 1
        m.route_established = True
        self.metrics.rrep_progress.append((self.source, self.now, self.energy.total()))
        self.log(self.source, "ROUTE", f"established hops={m.route_hops} path={m.route}")
        self._finish("established")

    def alarm(self, node: int, kind: VerdictKind, triple: Triple) -> None:
        src, dst, rid = triple
        self.trace.append(f"{self.now:.6f} | {node} | ALARM | {kind} | {src} {dst} {rid}")
        self.metrics.alarms.append((node, kind.value))
        self._finish("detected")

    def _finish(self, outcome: str) -> None:
        m = self.metrics
        self.stopped = True
        m.outcome = outcome
        m.rrep_total_time = round(self.now, 9)
        m.total_energy = self.energy.total()
        m.energy_snapshot = self.energy.snapshot()
        if self._rrep_started is not None:
            t0, e0 = self._rrep_started
            m.rrep_phase_time = round(self.now - t0, 9)
            m.rrep_phase_energy = m.total_energy - e0
        if m.alarms:
            if self.wormholes.ends:
                m.detection_count = len(m.alarms)
            else:
                m.false_positive_count = len(m.alarms)


# ---------------------------------------------------------------------------
# scenario assembly
# ---------------------------------------------------------------------------

def make_topology(cfg: ScenarioConfig) -> Topology:
    if cfg.positions is not None:
        return build_topology([(i, (x, y)) for i, x, y in cfg.positions], cfg.range)
    return random_topology(cfg.seed, cfg.node_count, cfg.area, cfg.range)


def farthest_pair(topo: Topology) -> tuple[int, int]:
    """Connected pair with the largest hop distance; lowest ids on ties."""
    best = None
    for a in topo.ids:
        for b, d in topo.hops_from(a).items():
            if a < b and (best is None or d > best[0]):
                best = (d, a, b)
    if best is None:
        raise ScenarioError("topology has no connected pair of nodes")
    return best[1], best[2]


def pick_random_wormholes(topo: Topology, count: int, mode: Mode, seed: int,
                          exclude: set[int]) -> list[WormholeLink]:
    rng = np.random.default_rng([seed, 0x3013])
    free = [n for n in topo.ids if n not in exclude]
    links: list[WormholeLink] = []
    for _ in range(count):
        pairs = [(a, b) for i, a in enumerate(free) for b in free[i + 1:]
                 if b not in topo.one_hop(a)]
        if not pairs:
            raise ScenarioError("no room for another wormhole (need two non-adjacent free nodes)")
        a, b = pairs[int(rng.integers(len(pairs)))]
        links.append(WormholeLink(a, b, mode))
        free = [n for n in free if n not in (a, b)]
    return links


def build_simulation(cfg: ScenarioConfig) -> Simulation:
    topo = make_topology(cfg)
    if cfg.source is None:
        source, destination = farthest_pair(topo)
    else:
        source, destination = cfg.source, cfg.destination
        for name, n in (("source", source), ("destination", destination)):
            if n not in topo:
                raise ConfigError(name, f"node {n} is not in the topology")
    links = list(cfg.wormholes)
    taken = {source, destination} | {e for link in links for e in (link.end_a, link.end_b)}
    links += pick_random_wormholes(topo, cfg.random_wormholes, cfg.random_wormhole_mode,
                                   cfg.seed, taken)
    for link in links:
        if {link.end_a, link.end_b} & {source, destination}:
            raise ConfigError("wormholes", "source and destination must be honest nodes")
    keys = keying.provision(topo, keying.seeded_masters(topo, cfg.seed))
    return Simulation(cfg, topo, keys, source, destination, links)


def simulate(cfg: ScenarioConfig) -> Simulation:
    """Run one discovery to completion and hand back the finished simulation."""
    sim = build_simulation(cfg)
    sim.metrics.honest_distance = sim.topo.distance(sim.source, sim.destination)
    routing.start_discovery(sim, sim.source, sim.destination)
    sim.run_until_done()
    return sim


def run(cfg: ScenarioConfig) -> RunResult:
    """Run one discovery from ``cfg`` to completion (route, alarm or timeout)."""
    sim = simulate(cfg)
    return RunResult(cfg, sim.metrics, sim.trace)


# ---------------------------------------------------------------------------
# overhead comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverheadRow:
    hop: int
    node_baseline: int
    node_prevention: int
    baseline_time: float
    prevention_time: float
    baseline_energy: float
    prevention_energy: float


@dataclass(frozen=True)
class OverheadComparison:
    baseline: RunResult
    prevention: RunResult
    rows: list[OverheadRow]

    @property
    def summary(self) -> dict[str, float]:
        b, p = self.baseline.metrics, self.prevention.metrics
        return {
            "baseline_rrep_time": b.rrep_total_time,
            "prevention_rrep_time": p.rrep_total_time,
            "baseline_energy": b.total_energy,
            "prevention_energy": p.total_energy,
            "max_collection_time": p.max_collection_time,
        }


def _progress_series(m: Metrics) -> list[tuple[int, float, float]]:
    if not m.rrep_progress:
        return []
    _, t0, e0 = m.rrep_progress[0]
    return [(node, round(t - t0, 9), e - e0) for node, t, e in m.rrep_progress]


def measure_overhead(baseline: ScenarioConfig, with_prevention: ScenarioConfig | None = None
                     ) -> OverheadComparison:
    """Run a config with prevention off and on; pair RREP progress hop by hop."""
    if with_prevention is None:
        baseline, with_prevention = baseline.with_(prevention_enabled=False), \
            baseline.with_(prevention_enabled=True)
    a, b = asdict(baseline), asdict(with_prevention)
    a.pop("prevention_enabled")
    b.pop("prevention_enabled")
    if a != b or baseline.prevention_enabled or not with_prevention.prevention_enabled:
        raise ScenarioError("configs must differ only in prevention_enabled (off, then on)")
    rb, rp = run(baseline), run(with_prevention)
    sb, sp = _progress_series(rb.metrics), _progress_series(rp.metrics)
    rows = [
        OverheadRow(k, nb, np_, tb, tp, eb, ep)
        for k, ((nb, tb, eb), (np_, tp, ep)) in enumerate(zip(sb, sp))
    ]
    return OverheadComparison(rb, rp, rows)


CONFIG_FIELDS = tuple(f.name for f in fields(ScenarioConfig))
