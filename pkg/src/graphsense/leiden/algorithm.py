"""Leiden community detection with modularity as the quality function.

One run alternates fast local moving, refinement into well-connected
sub-communities, and aggregation over the refined partition (the unrefined
partition seeds the next round) until no node moves. Runs are repeated from
the previous result until modularity stops improving.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from ..errors import EmptyGraph
from . import backend as _backend
from .structures import CommunityHierarchy, LeidenConfig, Partition, WeightedGraph

MAX_ROUNDS = 64
MAX_RUNS = 32
MAX_HALVINGS = 16


@dataclass
class CSRGraph:
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    node_k: np.ndarray
    self_w: np.ndarray

    @property
    def n(self) -> int:
        return len(self.node_k)

    @property
    def total_weight(self) -> float:
        return float(self.node_k.sum()) / 2.0


def _as_weighted(graph) -> WeightedGraph:
    if isinstance(graph, WeightedGraph):
        return graph
    if hasattr(graph, "to_weighted"):
        return graph.to_weighted()
    raise TypeError(f"cannot run community detection on {type(graph).__name__}")


def _csr_from_pairs(n: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray, self_w: np.ndarray) -> CSRGraph:
    """``src/dst/w`` hold each undirected off-diagonal edge once, already merged."""
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    ws = np.concatenate([w, w])
    order = np.lexsort((cols, rows))
    rows, cols, ws = rows[order], cols[order], ws[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    node_k = np.zeros(n, dtype=np.float64)
    # np.add.at accumulates element by element, unlike pairwise np.sum
    np.add.at(node_k, rows, ws)
    node_k += 2.0 * self_w
    return CSRGraph(indptr, cols.astype(np.int64), ws.astype(np.float64), node_k, self_w.astype(np.float64))


def _merge_pairs(n: int, src: np.ndarray, dst: np.ndarray, w: np.ndarray):
    a = np.minimum(src, dst)
    b = np.maximum(src, dst)
    self_mask = a == b
    self_w = np.zeros(n, dtype=np.float64)
    np.add.at(self_w, a[self_mask], w[self_mask])
    a, b, w = a[~self_mask], b[~self_mask], w[~self_mask]
    if len(a) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0), self_w
    key = a * n + b
    uniq, inverse = np.unique(key, return_inverse=True)
    merged = np.zeros(len(uniq), dtype=np.float64)
    np.add.at(merged, inverse, w)
    return (uniq // n).astype(np.int64), (uniq % n).astype(np.int64), merged, self_w


def build_csr(graph: WeightedGraph) -> CSRGraph:
    n = graph.n
    for i, j, w in graph.edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) references a missing node")
        if not w > 0:
            raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
    if graph.edges:
        e = np.asarray([(i, j) for i, j, _ in graph.edges], dtype=np.int64)
        w = np.asarray([w for _, _, w in graph.edges], dtype=np.float64)
        src, dst = e[:, 0], e[:, 1]
    else:
        src = dst = np.zeros(0, dtype=np.int64)
        w = np.zeros(0, dtype=np.float64)
    a, b, merged, self_w = _merge_pairs(n, src, dst, w)
    return _csr_from_pairs(n, a, b, merged, self_w)


def _dense(labels: np.ndarray) -> np.ndarray:
    """Relabel to 0..k-1 in order of first appearance."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(first))
    return rank[inverse.reshape(-1)]


def aggregate(csr: CSRGraph, refined: np.ndarray) -> CSRGraph:
    """Collapse each refined community into one node; internal weight
    becomes a self-loop."""
    k = int(refined.max()) + 1
    rows = np.repeat(np.arange(csr.n), np.diff(csr.indptr))
    # each undirected edge appears twice in CSR; keep the (row < col) copy
    keep = rows < csr.indices
    src = refined[rows[keep]]
    dst = refined[csr.indices[keep]]
    w = csr.weights[keep]
    a, b, merged, self_w = _merge_pairs(k, src, dst, w)
    np.add.at(self_w, refined, csr.self_w)
    return _csr_from_pairs(k, a, b, merged, self_w)


def _single_run(csr0: CSRGraph, cfg: LeidenConfig, rng, kern, scale: float, initial: np.ndarray | None) -> list[np.ndarray]:
    csr = csr0
    m = csr0.total_weight
    node_map = np.arange(csr0.n, dtype=np.int64)
    memb = np.arange(csr0.n, dtype=np.int64) if initial is None else _dense(initial)
    rounds: list[np.ndarray] = []
    for _ in range(MAX_ROUNDS):
        n = csr.n
        order = rng.permutation(n).astype(np.int64)
        kern.move_nodes_fast(
            csr.indptr, csr.indices, csr.weights, csr.node_k, memb, order,
            cfg.resolution, m, cfg.min_improvement,
        )
        memb = _dense(memb)
        if int(memb.max()) + 1 == n:
            break
        order = rng.permutation(n).astype(np.int64)
        uniforms = rng.random(n)
        refined = np.asarray(
            kern.refine_partition(
                csr.indptr, csr.indices, csr.weights, csr.node_k, memb, order, uniforms,
                cfg.resolution, cfg.randomness, m, scale,
            ),
            dtype=np.int64,
        )
        refined = _dense(refined)
        if int(refined.max()) + 1 == n:
            # refinement merged nothing; aggregate on the moved partition instead
            refined = memb
        # the aggregate graph starts from the unrefined partition
        seed_memb = np.empty(int(refined.max()) + 1, dtype=np.int64)
        seed_memb[refined] = memb
        csr = aggregate(csr, refined)
        node_map = refined[node_map]
        rounds.append(node_map.copy())
        memb = _dense(seed_memb)
    return rounds


def leiden_rounds(
    graph: WeightedGraph, cfg: LeidenConfig, kernels=None, *, scale: float | None = None
) -> list[np.ndarray]:
    """Run Leiden to convergence and return the refined partition of every
    aggregation round (finest first) as arrays over the original nodes.

    Whole runs are repeated, each seeded with the previous result, until
    modularity stops improving by more than ``cfg.min_improvement``. This is
    done for ``cfg.n_starts`` independent random streams and the rounds of
    the highest-modularity run are returned.
    """
    kern = kernels or _backend.kernels
    csr = build_csr(graph)
    if csr.total_weight <= 0:
        return []
    if scale is None:
        scale = float(len(graph.edges)) or 1.0
    singletons = _csr_modularity(csr, np.arange(csr.n), cfg.resolution)
    best: list[np.ndarray] = []
    best_q = singletons
    # independent restarts; the first start uses cfg.seed's own stream
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_starts)
    for stream in streams:
        rng = np.random.Generator(np.random.PCG64(stream))
        rounds, q = _converge(csr, cfg, rng, kern, scale, singletons)
        if rounds and (not best or q > best_q + cfg.min_improvement):
            best, best_q = rounds, q
    return best


def _converge(csr: CSRGraph, cfg: LeidenConfig, rng, kern, scale: float, q0: float):
    best: list[np.ndarray] = []
    best_q = q0
    initial = None
    for _ in range(MAX_RUNS):
        rounds = _single_run(csr, cfg, rng, kern, scale, initial)
        if not rounds:
            break
        q = _csr_modularity(csr, rounds[-1], cfg.resolution)
        if not q > best_q + cfg.min_improvement:
            break
        best, best_q, initial = rounds, q, rounds[-1]
    return best, best_q


def _partition_from_array(level: int, labels: Sequence[str], arr: np.ndarray) -> Partition:
    # dense ids ordered by the smallest member label
    first: dict[int, str] = {}
    for label, c in zip(labels, arr.tolist()):
        if c not in first or label < first[c]:
            first[c] = label
    ranked = {c: i for i, c in enumerate(sorted(first, key=first.__getitem__))}
    return Partition(level, {label: ranked[c] for label, c in zip(labels, arr.tolist())})


def _components(csr: CSRGraph) -> int:
    parent = list(range(csr.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    indptr, indices = csr.indptr.tolist(), csr.indices.tolist()
    for v in range(csr.n):
        for p in range(indptr[v], indptr[v + 1]):
            parent[find(v)] = find(indices[p])
    return len({find(v) for v in range(csr.n)})


def _coarsen(wg: WeightedGraph, leaf: np.ndarray, cfg: LeidenConfig, kernels) -> list[np.ndarray]:
    """Coarser partitions above ``leaf``, finest first.

    Each step runs Leiden on the graph aggregated over the current partition
    with the resolution halved until the community count drops. Coarsening
    stops before any connected component would collapse to one community.
    """
    csr0 = build_csr(wg)
    floor = _components(csr0)
    scale = float(len(wg.edges)) or 1.0
    out: list[np.ndarray] = []
    current = _dense(leaf)
    resolution = cfg.resolution
    while len(out) + 1 < cfg.max_levels:
        k = int(current.max()) + 1
        if k <= floor:
            break
        agg = aggregate(csr0, current)
        coarse = None
        for _ in range(MAX_HALVINGS):
            resolution /= 2.0
            sub = replace(cfg, resolution=resolution)
            rounds = leiden_rounds(_csr_to_weighted(agg), sub, kernels, scale=scale)
            if rounds and int(rounds[-1].max()) + 1 < k:
                coarse = _dense(rounds[-1])
                break
        if coarse is None or int(coarse.max()) + 1 <= floor:
            break
        current = coarse[current]
        out.append(current.copy())
    return out


def _csr_to_weighted(csr: CSRGraph) -> WeightedGraph:
    edges = [(v, v, w) for v, w in enumerate(csr.self_w.tolist()) if w > 0]
    indptr, indices, weights = csr.indptr.tolist(), csr.indices.tolist(), csr.weights.tolist()
    for v in range(csr.n):
        for p in range(indptr[v], indptr[v + 1]):
            if indices[p] > v:
                edges.append((v, indices[p], weights[p]))
    return WeightedGraph([str(i) for i in range(csr.n)], edges)


def detect_communities(graph, cfg: LeidenConfig | None = None, *, kernels=None) -> CommunityHierarchy:
    """Hierarchical Leiden.

    The deepest level is the converged Leiden partition. Coarser levels are
    found by repeating Leiden on the aggregated graph at halved resolution,
    so every level is a union of communities of the level below. Level 0 is
    the coarsest; at most ``cfg.max_levels`` levels are produced.
    """
    cfg = cfg or LeidenConfig()
    wg = _as_weighted(graph)
    if wg.n == 0:
        raise EmptyGraph("graph has no nodes")
    labels = list(wg.labels)
    if len(set(labels)) != len(labels):
        raise ValueError("node labels must be unique")

    rounds = leiden_rounds(wg, cfg, kernels)
    leaf = rounds[-1] if rounds else np.arange(wg.n, dtype=np.int64)
    arrays = [leaf] + (_coarsen(wg, leaf, cfg, kernels) if rounds else [])
    arrays = arrays[::-1]

    levels = [_partition_from_array(k, labels, arr) for k, arr in enumerate(arrays)]
    parents: list[dict[int, int]] = [{}]
    for k in range(1, len(levels)):
        up, down = levels[k - 1].assignment, levels[k].assignment
        parents.append({down[label]: up[label] for label in labels})
    return CommunityHierarchy(labels, levels, parents)


def _assignment_array(graph: WeightedGraph, partition) -> np.ndarray:
    if isinstance(partition, Partition):
        partition = partition.assignment
    if isinstance(partition, Mapping):
        missing = [label for label in graph.labels if label not in partition]
        if missing:
            raise ValueError(f"partition does not cover nodes {missing[:5]}")
        values = [partition[label] for label in graph.labels]
    else:
        values = list(partition)
        if len(values) != graph.n:
            raise ValueError("partition must have one entry per node")
    ids: dict = {}
    return np.asarray([ids.setdefault(x, len(ids)) for x in values], dtype=np.int64)


def _csr_modularity(csr: CSRGraph, comm: np.ndarray, resolution: float) -> float:
    m = csr.total_weight
    comm = np.asarray(comm, dtype=np.int64)
    k = int(comm.max()) + 1
    rows = np.repeat(np.arange(csr.n), np.diff(csr.indptr))
    inside = (rows < csr.indices) & (comm[rows] == comm[csr.indices])
    w_in = np.zeros(k)
    np.add.at(w_in, comm, csr.self_w)
    np.add.at(w_in, comm[rows[inside]], csr.weights[inside])
    deg = np.zeros(k)
    np.add.at(deg, comm, csr.node_k)
    q = 0.0
    for c in range(k):
        q += float(w_in[c]) / m - resolution * (float(deg[c]) / (2.0 * m)) ** 2
    return q


def modularity(graph, partition, resolution: float = 1.0) -> float:
    """Sum over communities of (internal weight / m) - resolution * (degree / 2m)^2."""
    wg = _as_weighted(graph)
    if wg.n == 0:
        raise EmptyGraph("graph has no nodes")
    csr = build_csr(wg)
    if csr.total_weight <= 0:
        raise EmptyGraph("graph has no edge weight")
    return _csr_modularity(csr, _assignment_array(wg, partition), resolution)


def project_level(hierarchy: CommunityHierarchy, requested_level: int) -> Partition:
    """Communities at ``requested_level``; a community with no
    sub-communities that deep is carried down unchanged."""
    if requested_level < 0:
        raise ValueError("requested_level must be >= 0")
    current: list[tuple[int, int]] = [(0, c) for c in range(hierarchy.levels[0].n_communities)]
    for level in range(1, min(requested_level, hierarchy.depth - 1) + 1):
        nxt: list[tuple[int, int]] = []
        for ref in current:
            kids = hierarchy.children(ref[0], ref[1]) if ref[0] == level - 1 else []
            if kids:
                nxt.extend((level, c) for c in kids)
            else:
                nxt.append(ref)
        current = nxt
    members = {ref: hierarchy.communities(ref[0])[ref[1]] for ref in current}
    assignment = {label: i for i, ref in enumerate(current) for label in members[ref]}
    return Partition(requested_level, assignment, refs=list(current))
