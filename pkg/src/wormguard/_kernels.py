"""Numeric kernels: unit-disc adjacency, two-hop composition, BFS hops, key folding.

Each kernel has a numba ``@njit`` version and a pure-numpy version with the
same signature.  The numba path is used when numba imports cleanly and the
environment variable ``WORMGUARD_DISABLE_NUMBA`` is unset (or ``0``).  Both
paths are always importable as ``numba_kernels`` / ``numpy_kernels`` so tests
and the benchmark can compare them directly.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

MIX_C1 = np.uint64(0xBF58476D1CE4E5B9)
MIX_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


# --------------------------------------------------------------------------
# pure numpy
# --------------------------------------------------------------------------

def _adjacency_np(xy, radius):
    d = xy[:, None, :] - xy[None, :, :]
    dist2 = (d * d).sum(axis=2)
    adj = dist2 <= radius * radius
    np.fill_diagonal(adj, False)
    return adj


def _two_hop_np(adj):
    n = adj.shape[0]
    a = adj.astype(np.int64)
    reach = (a @ a) > 0
    out = reach & ~adj
    out[np.arange(n), np.arange(n)] = False
    return out


def _bfs_hops_np(adj, src):
    n = adj.shape[0]
    dist = np.full(n, -1, dtype=np.int64)
    dist[src] = 0
    frontier = np.zeros(n, dtype=np.bool_)
    frontier[src] = True
    level = 0
    while frontier.any():
        level += 1
        nxt = adj[frontier].any(axis=0) & (dist < 0)
        dist[nxt] = level
        frontier = nxt
    return dist


def _mix64_np(z):
    # vectorised over a uint64 array; numpy wraps silently for arrays
    z = z ^ (z >> _S30)
    z = z * MIX_C1
    z = z ^ (z >> _S27)
    z = z * MIX_C2
    z = z ^ (z >> _S31)
    return z


def _fold_keys_np(masters, ids, lengths):
    """Fold each row of ``ids`` (first ``lengths[r]`` entries, pre-sorted) into ``masters[r]``."""
    acc = masters.astype(np.uint64).copy()
    if ids.shape[1] == 0:
        return acc
    for col in range(ids.shape[1]):
        live = lengths > col
        if not live.any():
            break
        acc[live] = _mix64_np(acc[live] ^ ids[live, col].astype(np.uint64))
    return acc


numpy_kernels = SimpleNamespace(
    name="numpy",
    adjacency=_adjacency_np,
    two_hop=_two_hop_np,
    bfs_hops=_bfs_hops_np,
    fold_keys=_fold_keys_np,
)


# --------------------------------------------------------------------------
# numba
# --------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def adjacency(xy, radius):
        n = xy.shape[0]
        r2 = radius * radius
        adj = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            for j in range(i + 1, n):
                dx = xy[i, 0] - xy[j, 0]
                dy = xy[i, 1] - xy[j, 1]
                if dx * dx + dy * dy <= r2:
                    adj[i, j] = True
                    adj[j, i] = True
        return adj

    @njit(cache=True)
    def two_hop(adj):
        n = adj.shape[0]
        out = np.zeros((n, n), dtype=np.bool_)
        for i in range(n):
            for k in range(n):
                if adj[i, k]:
                    for j in range(n):
                        if adj[k, j] and j != i and not adj[i, j]:
                            out[i, j] = True
        return out

    @njit(cache=True)
    def bfs_hops(adj, src):
        n = adj.shape[0]
        dist = np.full(n, -1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        dist[src] = 0
        queue[0] = src
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            for v in range(n):
                if adj[u, v] and dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue[tail] = v
                    tail += 1
        return dist

    @njit(cache=True)
    def mix64(z):
        z = z ^ (z >> np.uint64(30))
        z = z * np.uint64(0xBF58476D1CE4E5B9)
        z = z ^ (z >> np.uint64(27))
        z = z * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
        return z

    @njit(cache=True)
    def fold_keys(masters, ids, lengths):
        rows = masters.shape[0]
        out = np.empty(rows, dtype=np.uint64)
        for r in range(rows):
            acc = np.uint64(masters[r])
            for c in range(lengths[r]):
                acc = mix64(acc ^ np.uint64(ids[r, c]))
            out[r] = acc
        return out

    return SimpleNamespace(
        name="numba",
        adjacency=adjacency,
        two_hop=two_hop,
        bfs_hops=bfs_hops,
        fold_keys=fold_keys,
    )


try:
    numba_kernels = _build_numba()
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba_kernels = None


def numba_disabled() -> bool:
    return os.environ.get("WORMGUARD_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")


def active():
    """The kernel namespace selected by the environment."""
    if numba_kernels is None or numba_disabled():
        return numpy_kernels
    return numba_kernels
