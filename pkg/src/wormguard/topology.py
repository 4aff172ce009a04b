"""Unit-disc connectivity graphs with one-hop and two-hop neighbor queries."""
from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import SetupError

Position = tuple[float, float]


@dataclass(frozen=True, eq=False)
class Topology:
    """Static node placement and the adjacency it induces.

    ``ids`` is sorted ascending; row ``k`` of ``adj`` and ``two_hop_adj``
    belongs to ``ids[k]``.
    """

    nodes: dict[int, Position]
    range: float
    ids: tuple[int, ...]
    adj: np.ndarray = field(repr=False)
    two_hop_adj: np.ndarray = field(repr=False)
    _index: dict[int, int] = field(repr=False)
    _one: dict[int, frozenset[int]] = field(repr=False)
    _two: dict[int, frozenset[int]] = field(repr=False)

    @property
    def adjacency(self) -> dict[int, frozenset[int]]:
        return dict(self._one)

    def __contains__(self, n: object) -> bool:
        return n in self._index

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return self.range == other.range and self.nodes == other.nodes

    def __hash__(self) -> int:
        return hash((self.range, tuple(sorted(self.nodes.items()))))

    def index(self, n: int) -> int:
        try:
            return self._index[n]
        except KeyError:
            raise KeyError(f"unknown node id {n!r}") from None

    def one_hop(self, n: int) -> frozenset[int]:
        self.index(n)
        return self._one[n]

    def two_hop(self, n: int) -> frozenset[int]:
        self.index(n)
        return self._two[n]

    def hops_from(self, n: int) -> dict[int, int]:
        """BFS hop distance from ``n`` to every reachable node (including itself at 0)."""
        dist = _kernels.active().bfs_hops(self.adj, self.index(n))
        return {self.ids[k]: int(d) for k, d in enumerate(dist) if d >= 0}

    def distance(self, a: int, b: int) -> int | None:
        return self.hops_from(a).get(b)

    def shortest_path(self, a: int, b: int) -> list[int] | None:
        dist = self.hops_from(b)
        if a not in dist:
            return None
        path = [a]
        while path[-1] != b:
            cur = path[-1]
            path.append(min(m for m in self._one[cur] if dist.get(m) == dist[cur] - 1))
        return path

    def dumps(self) -> str:
        lines = [f"range {self.range!r}"]
        lines += [f"{n} {x!r} {y!r}" for n, (x, y) in sorted(self.nodes.items())]
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())


def build_topology(
    positions: Mapping[int, Position] | Iterable[tuple[int, Position]],
    range: float,
) -> Topology:
    """Build a unit-disc graph: ``a`` and ``b`` are adjacent iff their distance is <= ``range``."""
    items = list(positions.items()) if isinstance(positions, Mapping) else list(positions)
    if not items:
        raise SetupError("positions must be non-empty")
    if not (isinstance(range, (int, float)) and math.isfinite(range) and range > 0):
        raise SetupError(f"range must be positive, got {range!r}")
    nodes: dict[int, Position] = {}
    for n, pos in items:
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 0:
            raise SetupError(f"node id must be a non-negative integer, got {n!r}")
        n = int(n)
        if n in nodes:
            raise SetupError(f"duplicate node id {n}")
        x, y = float(pos[0]), float(pos[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SetupError(f"node {n} has a non-finite position")
        nodes[n] = (x, y)

    ids = tuple(sorted(nodes))
    xy = np.array([nodes[n] for n in ids], dtype=np.float64)
    k = _kernels.active()
    adj = k.adjacency(xy, float(range))
    two = k.two_hop(adj)

    one_sets = {n: frozenset(ids[j] for j in np.flatnonzero(adj[i])) for i, n in enumerate(ids)}
    two_sets = {n: frozenset(ids[j] for j in np.flatnonzero(two[i])) for i, n in enumerate(ids)}
    return Topology(
        nodes=nodes,
        range=float(range),
        ids=ids,
        adj=adj,
        two_hop_adj=two,
        _index={n: i for i, n in enumerate(ids)},
        _one=one_sets,
        _two=two_sets,
    )


def one_hop(topo: Topology, n: int) -> frozenset[int]:
    return topo.one_hop(n)


def two_hop(topo: Topology, n: int) -> frozenset[int]:
    """Nodes at graph distance exactly 2 from ``n``."""
    return topo.two_hop(n)


def random_topology(
    seed: int,
    n: int = 30,
    area: tuple[float, float] = (600.0, 600.0),
    range: float = 250.0,
) -> Topology:
    """``n`` nodes (ids ``0..n-1``) placed uniformly over ``area`` from a seeded generator."""
    if n < 2:
        raise SetupError(f"need at least 2 nodes, got {n}")
    w, h = area
    if w <= 0 or h <= 0:
        raise SetupError(f"area must be positive, got {area!r}")
    rng = np.random.default_rng(seed)
    xy = rng.uniform((0.0, 0.0), (w, h), size=(n, 2))
    return build_topology({i: (float(x), float(y)) for i, (x, y) in enumerate(xy)}, range)


def loads(text: str) -> Topology:
    """Parse the ``range <m>`` + ``id x y`` node list format."""
    radius = None
    positions: list[tuple[int, Position]] = []
    seen: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "range":
                if len(parts) != 2 or radius is not None:
                    raise ValueError("expected a single 'range <meters>' line")
                radius = float(parts[1])
                if not (math.isfinite(radius) and radius > 0):
                    raise ValueError(f"range must be positive, got {parts[1]}")
            else:
                if radius is None:
                    raise ValueError("the 'range <meters>' header must come first")
                if len(parts) != 3:
                    raise ValueError("expected 'id x y'")
                n = int(parts[0])
                if n < 0 or n in seen:
                    raise ValueError(f"node id {n} is negative or repeated")
                seen.add(n)
                positions.append((n, (float(parts[1]), float(parts[2]))))
        except ValueError as exc:
            raise SetupError(f"line {lineno}: {exc}") from None
    if radius is None:
        raise SetupError("missing 'range' header")
    return build_topology(positions, radius)


def load(path: str | Path) -> Topology:
    return loads(Path(path).read_text())
