"""Pure-Python Leiden kernels.

Reference implementation for ``_ckernels.pyx``; both must perform the same
floating-point operations in the same order so that the two backends return
identical partitions for identical inputs.

Gains are expressed as modularity differences (edge weights divided by the
total weight ``m``), which keeps every comparison invariant under a uniform
rescaling of the weights.
"""

from __future__ import annotations

import math

BACKEND = "python"


def move_nodes_fast(indptr, indices, weights, node_k, membership, order, gamma, m, eps):
    """Queue-based local moving. Updates ``membership`` in place and returns
    the number of moves made."""
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    k = node_k.tolist()
    memb = membership.tolist()
    n = len(k)
    two_m2 = 2.0 * m * m

    comm_k = [0.0] * n
    comm_size = [0] * n
    for v in range(n):
        comm_k[memb[v]] += k[v]
        comm_size[memb[v]] += 1
    empty = [c for c in range(n - 1, -1, -1) if comm_size[c] == 0]

    neigh_w = [0.0] * n
    seen = [False] * n
    queue = list(order.tolist())
    in_queue = [True] * n
    head = 0
    size = n
    moves = 0

    while size > 0:
        v = queue[head]
        head = (head + 1) % n
        size -= 1
        in_queue[v] = False

        c_old = memb[v]
        kv = k[v]
        cands = []
        for p in range(indptr[v], indptr[v + 1]):
            c = memb[indices[p]]
            if not seen[c]:
                seen[c] = True
                cands.append(c)
            neigh_w[c] += weights[p]

        comm_k[c_old] -= kv
        comm_size[c_old] -= 1
        stay = neigh_w[c_old] / m - gamma * (kv * comm_k[c_old]) / two_m2
        best, best_gain = c_old, stay
        for c in cands:
            if c == c_old:
                continue
            g = neigh_w[c] / m - gamma * (kv * comm_k[c]) / two_m2
            if g > best_gain:
                best, best_gain = c, g
        if comm_size[c_old] > 0 and 0.0 > best_gain:
            best, best_gain = empty[-1], 0.0
        if best != c_old and not (best_gain - stay > eps):
            best = c_old

        for c in cands:
            neigh_w[c] = 0.0
            seen[c] = False

        if best != c_old:
            if comm_size[best] == 0:
                empty.pop()
            if comm_size[c_old] == 0:
                empty.append(c_old)
            memb[v] = best
            moves += 1
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if not in_queue[u] and memb[u] != best:
                    queue[(head + size) % n] = u
                    size += 1
                    in_queue[u] = True
        comm_k[best] += kv
        comm_size[best] += 1

    membership[:] = memb
    return moves


def refine_partition(indptr, indices, weights, node_k, membership, order, uniforms, gamma, theta, m, scale):
    """Merge singletons into well-connected sub-communities of each community.

    Returns an array of refined community ids (the id of a refined
    community is the node that seeded it).
    """
    indptr = indptr.tolist()
    indices = indices.tolist()
    weights = weights.tolist()
    k = node_k.tolist()
    memb = membership.tolist()
    n = len(k)
    two_m2 = 2.0 * m * m

    comm_k = [0.0] * n
    for v in range(n):
        comm_k[memb[v]] += k[v]
    w_own = [0.0] * n
    for v in range(n):
        cv = memb[v]
        acc = 0.0
        for p in range(indptr[v], indptr[v + 1]):
            if memb[indices[p]] == cv:
                acc += weights[p]
        w_own[v] = acc

    refined = list(range(n))
    r_k = list(k)
    r_ext = list(w_own)
    r_size = [1] * n
    w_to = [0.0] * n
    seen = [False] * n

    for pos, v in enumerate(order.tolist()):
        if refined[v] != v or r_size[v] != 1:
            continue
        c = memb[v]
        kv = k[v]
        kc = comm_k[c]
        if not (w_own[v] / m >= gamma * (kv * (kc - kv)) / two_m2):
            continue

        cands = []
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if memb[u] != c:
                continue
            t = refined[u]
            if not seen[t]:
                seen[t] = True
                cands.append(t)
            w_to[t] += weights[p]

        options = [v]
        gains = [0.0]
        for t in cands:
            if t == v:
                continue
            if not (r_ext[t] / m >= gamma * (r_k[t] * (kc - r_k[t])) / two_m2):
                continue
            g = w_to[t] / m - gamma * (kv * r_k[t]) / two_m2
            if g >= 0.0:
                options.append(t)
                gains.append(g)

        chosen = v
        if len(options) > 1:
            top = gains[0]
            for g in gains:
                if g > top:
                    top = g
            total = 0.0
            probs = []
            for g in gains:
                x = math.exp((g - top) * scale / theta)
                probs.append(x)
                total += x
            r = uniforms[pos] * total
            acc = 0.0
            chosen = options[-1]
            for i in range(len(options)):
                acc += probs[i]
                if r < acc:
                    chosen = options[i]
                    break

        if chosen != v:
            refined[v] = chosen
            r_size[chosen] += 1
            r_size[v] = 0
            r_k[chosen] += kv
            r_ext[chosen] = r_ext[chosen] + r_ext[v] - 2.0 * w_to[chosen]

        for t in cands:
            w_to[t] = 0.0
            seen[t] = False

    return refined
