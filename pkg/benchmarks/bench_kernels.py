"""Time the numba and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--sizes 30 100 300] [--repeat 20]

Each backend is warmed up once (numba compiles on first call) before timing.
Outputs agree bit for bit; the script checks that before reporting.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from wormguard._kernels import numba_kernels, numpy_kernels


def workload(k, xy, radius, masters, ids, lengths):
    adj = k.adjacency(xy, radius)
    two = k.two_hop(adj)
    hops = k.bfs_hops(adj, 0)
    keys = k.fold_keys(masters, ids, lengths)
    return adj, two, hops, keys


def inputs(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    side = 600.0 * np.sqrt(n / 30)  # keep the default 30-nodes-per-600m-square density
    xy = rng.uniform(0, side, size=(n, 2))
    adj = numpy_kernels.adjacency(xy, 250.0)
    two = numpy_kernels.two_hop(adj)
    width = max(int(two.sum(axis=1).max()), 1)
    ids = np.zeros((n, width), dtype=np.uint64)
    lengths = two.sum(axis=1).astype(np.int64)
    for i in range(n):
        ids[i, : lengths[i]] = np.flatnonzero(two[i])
    masters = rng.integers(0, 1 << 64, size=n, dtype=np.uint64)
    return xy, 250.0, masters, ids, lengths


def main(argv=None) -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[30, 100, 300, 1000])
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)

    print(f"{'nodes':>6} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for n in args.sizes:
        data = inputs(n)
        a = workload(numpy_kernels, *data)
        b = workload(numba_kernels, *data)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "backends disagree"
        t_np = min(timeit.repeat(lambda: workload(numpy_kernels, *data), number=1,
                                 repeat=args.repeat))
        t_nb = min(timeit.repeat(lambda: workload(numba_kernels, *data), number=1,
                                 repeat=args.repeat))
        print(f"{n:>6} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>8.1f}")


if __name__ == "__main__":
    main()
