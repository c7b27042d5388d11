"""Small named graphs for the community detection tests.

Each builder returns ``(n, edges)`` with edges as ``(i, j, w)`` tuples.
"""

from __future__ import annotations

import itertools
import random


def _e(pairs, w: float = 1.0):
    return [(a, b, w) for a, b in pairs]


def complete(n: int, offset: int = 0):
    return _e(itertools.combinations(range(offset, offset + n), 2))


def path(n: int):
    return n, _e((i, i + 1) for i in range(n - 1))


def cycle(n: int):
    return n, _e((i, (i + 1) % n) for i in range(n))


def star(leaves: int):
    return leaves + 1, _e((0, i) for i in range(1, leaves + 1))


def wheel(n: int):
    # hub 0 plus a rim cycle over 1..n-1
    rim = list(range(1, n))
    return n, _e([(0, i) for i in rim] + [(rim[i], rim[(i + 1) % len(rim)]) for i in range(len(rim))])


def barbell(k: int, bridge: float = 1.0):
    edges = complete(k) + complete(k, k)
    edges.append((k - 1, k, bridge))
    return 2 * k, edges


def clique_ring(cliques: int, size: int):
    edges = []
    for c in range(cliques):
        edges += complete(size, c * size)
    for c in range(cliques):
        a = c * size + size - 1
        b = ((c + 1) % cliques) * size
        edges.append((a, b, 1.0))
    return cliques * size, edges


def bipartite(a: int, b: int):
    return a + b, _e((i, a + j) for i in range(a) for j in range(b))


def grid(rows: int, cols: int):
    pairs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                pairs.append((v, v + 1))
            if r + 1 < rows:
                pairs.append((v, v + cols))
    return rows * cols, _e(pairs)


def lollipop(k: int, tail: int):
    edges = complete(k)
    for i in range(tail):
        edges.append((k - 1 + i, k + i, 1.0))
    return k + tail, edges


def random_connected(n: int, p: float, seed: int, weighted: bool = False):
    rng = random.Random(seed)
    while True:
        pairs = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
        if _connected(n, pairs):
            return n, [(i, j, float(rng.randint(1, 5)) if weighted else 1.0) for i, j in pairs]


def _connected(n: int, pairs) -> bool:
    adj = {i: set() for i in range(n)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == n


def is_connected(n: int, edges) -> bool:
    return _connected(n, [(a, b) for a, b, _ in edges])


def fixture_suite() -> dict[str, tuple[int, list]]:
    """Graphs with n <= 8, small enough for exhaustive enumeration."""
    g: dict[str, tuple[int, list]] = {
        "barbell_k3": barbell(3),
        "barbell_k4": barbell(4),
        "barbell_k3_weak_bridge": barbell(3, 0.1),
        "barbell_k3_heavy_bridge": barbell(3, 4.0),
        "bowtie": (5, complete(3) + [(2, 3, 1.0), (3, 4, 1.0), (2, 4, 1.0)]),
        "house": (5, _e([(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)])),
        "binary_tree_7": (7, _e([(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)])),
        "k4": (4, complete(4)),
        "k5": (5, complete(5)),
        "lollipop_4_3": lollipop(4, 3),
        "lollipop_5_3": lollipop(5, 3),
        "k2_3": bipartite(2, 3),
        "k3_3": bipartite(3, 3),
        "k4_4": bipartite(4, 4),
        "grid_2x3": grid(2, 3),
        "grid_2x4": grid(2, 4),
        "two_squares_diag": (8, _e([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2),
                                    (4, 5), (5, 6), (6, 7), (7, 4), (4, 6), (3, 4)])),
    }
    for n in range(3, 9):
        g[f"path_{n}"] = path(n)
    for n in range(4, 9):
        g[f"cycle_{n}"] = cycle(n)
    for leaves in range(3, 8):
        g[f"star_{leaves}"] = star(leaves)
    for n in range(5, 9):
        g[f"wheel_{n}"] = wheel(n)
    for i, (n, p) in enumerate([(7, 0.4), (8, 0.35), (8, 0.5), (7, 0.6), (8, 0.3)]):
        g[f"random_{i}"] = random_connected(n, p, seed=100 + i)
    g["random_weighted"] = random_connected(8, 0.45, seed=7, weighted=True)
    return g


def disconnected_suite() -> dict[str, tuple[int, list]]:
    return {
        "two_triangles": (6, complete(3) + complete(3, 3)),
        "path4_plus_triangle": (7, _e([(0, 1), (1, 2), (2, 3)]) + complete(3, 4)),
        "k4_plus_edge": (6, complete(4) + [(4, 5, 1.0)]),
        "k3_plus_isolated": (4, complete(3)),
    }
