"""Compare the compiled and pure-Python Leiden backends.

Times whole ``leiden_rounds`` calls (one start each) and the two kernels in
isolation on random clustered graphs, and checks that both backends return
identical partitions.

    python benchmarks/bench_leiden.py [--sizes 500 2000 8000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import random
import time

import numpy as np

from graphsense.leiden import LeidenConfig, WeightedGraph, leiden_rounds
from graphsense.leiden import _pykernels
from graphsense.leiden.algorithm import build_csr
from graphsense.leiden.backend import compiled_kernels


def clustered_graph(n: int, seed: int = 0) -> WeightedGraph:
    """Planted partition: groups of ~25 nodes, dense inside, sparse across."""
    rng = random.Random(seed)
    group = [i // 25 for i in range(n)]
    edges = set()
    for v in range(n):
        for _ in range(6):
            u = rng.randrange(n)
            same = group[u] == group[v]
            if u != v and (same or rng.random() < 0.15):
                edges.add((min(u, v), max(u, v)))
        base = group[v] * 25
        for _ in range(4):
            u = base + rng.randrange(25)
            if u < n and u != v:
                edges.add((min(u, v), max(u, v)))
    return WeightedGraph.from_edges([(a, b, 1.0 + rng.random()) for a, b in sorted(edges)], n)


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if compiled_kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")

    cfg = LeidenConfig(seed=1, n_starts=1)
    print(f"{'nodes':>7} {'edges':>8} {'kernel':>8} {'python s':>10} {'compiled s':>11} {'speedup':>8}  same")
    for n in args.sizes:
        g = clustered_graph(n)
        csr = build_csr(g)
        m = csr.total_weight
        order = np.random.default_rng(0).permutation(n).astype(np.int64)

        def move(kern):
            memb = np.arange(n, dtype=np.int64)
            kern.move_nodes_fast(csr.indptr, csr.indices, csr.weights, csr.node_k, memb, order, 1.0, m, 1e-9)
            return memb

        memb = move(_pykernels)
        uniforms = np.random.default_rng(1).random(n)

        def refine(kern):
            return np.asarray(kern.refine_partition(
                csr.indptr, csr.indices, csr.weights, csr.node_k, memb, order, uniforms, 1.0, 0.01, m, float(len(g.edges))
            ))

        rows = [
            ("move", lambda k: move(k)),
            ("refine", lambda k: refine(k)),
            ("leiden", lambda k: leiden_rounds(g, cfg, k)),
        ]
        for name, fn in rows:
            py = best_of(lambda: fn(_pykernels), args.repeat)
            cy = best_of(lambda: fn(compiled_kernels), args.repeat)
            a, b = fn(_pykernels), fn(compiled_kernels)
            same = all(np.array_equal(x, y) for x, y in zip(a, b)) if name == "leiden" else np.array_equal(a, b)
            print(f"{n:>7} {len(g.edges):>8} {name:>8} {py:>10.4f} {cy:>11.4f} {py / cy:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
