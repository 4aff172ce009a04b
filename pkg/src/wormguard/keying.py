"""Per-node keys derived from two-hop neighbor identity sets.

The derivation folds a sorted ID list into the node's master key through a
fixed 64-bit mixer (the splitmix64 finalizer).  It is deterministic and
set-sensitive but is *not* a cryptographic PRF; swap ``derive_key`` for a
keyed MAC if strength matters.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import SetupError
from .topology import Topology

MASK64 = (1 << 64) - 1


def _ids_array(ids: Iterable[int]) -> np.ndarray:
    ordered = sorted(set(int(i) for i in ids))
    if ordered and ordered[0] < 0:
        raise ValueError("node ids must be non-negative")
    return np.asarray(ordered, dtype=np.uint64)


def derive_key(master: int, ids: Iterable[int]) -> int:
    """Fold ``ids`` (ascending) into ``master``: ``acc = mix64(acc ^ id)`` per id."""
    row = _ids_array(ids)
    out = _kernels.active().fold_keys(
        np.array([master & MASK64], dtype=np.uint64),
        row.reshape(1, -1),
        np.array([row.size], dtype=np.int64),
    )
    return int(out[0])


def derive_keys(masters: Iterable[int], id_sets: Iterable[Iterable[int]]) -> list[int]:
    """Batch form of :func:`derive_key`."""
    masters = [m & MASK64 for m in masters]
    rows = [_ids_array(s) for s in id_sets]
    if len(rows) != len(masters):
        raise ValueError("masters and id_sets differ in length")
    width = max((r.size for r in rows), default=0)
    ids = np.zeros((len(rows), width), dtype=np.uint64)
    for k, r in enumerate(rows):
        ids[k, : r.size] = r
    lengths = np.array([r.size for r in rows], dtype=np.int64)
    out = _kernels.active().fold_keys(np.array(masters, dtype=np.uint64), ids, lengths)
    return [int(v) for v in out]


# A local key is the same fold over the responders actually observed.
derive_local_key = derive_key


@dataclass(frozen=True)
class KeyEntry:
    master: int
    provisioned: int
    provisioned_set: frozenset[int]


class KeyTable:
    """Trusted-setup key material, one entry per node."""

    def __init__(self, entries: Mapping[int, KeyEntry]):
        self._entries = dict(entries)

    def __getitem__(self, n: int) -> KeyEntry:
        return self._entries[n]

    def __contains__(self, n: object) -> bool:
        return n in self._entries

    def __iter__(self):
        return iter(sorted(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def master(self, n: int) -> int:
        return self._entries[n].master

    def provisioned(self, n: int) -> int:
        return self._entries[n].provisioned

    def provisioned_set(self, n: int) -> frozenset[int]:
        return self._entries[n].provisioned_set

    def dumps(self) -> str:
        lines = []
        for n in self:
            e = self._entries[n]
            ids = ",".join(str(i) for i in sorted(e.provisioned_set))
            lines.append(f"{n} {e.master:016x} {e.provisioned:016x} {ids}".rstrip())
        return "\n".join(lines) + "\n"


def provision(topo: Topology, masters: Mapping[int, int]) -> KeyTable:
    missing = [n for n in topo.ids if n not in masters]
    if missing:
        raise SetupError(f"no master key for node(s) {missing}")
    order = list(topo.ids)
    sets = [topo.two_hop(n) for n in order]
    keys = derive_keys([masters[n] for n in order], sets)
    return KeyTable(
        {n: KeyEntry(masters[n] & MASK64, k, s) for n, k, s in zip(order, keys, sets)}
    )


def seeded_masters(topo: Topology, seed: int) -> dict[int, int]:
    """Distinct per-node master keys drawn from the scenario seed."""
    rng = np.random.default_rng([seed, 0x6B6579])
    masters: dict[int, int] = {}
    used: set[int] = set()
    for n in topo.ids:
        while True:
            m = int(rng.integers(0, 1 << 64, dtype=np.uint64))
            if m not in used:
                break
        used.add(m)
        masters[n] = m
    return masters
