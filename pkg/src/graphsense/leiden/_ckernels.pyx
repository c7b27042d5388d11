# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Leiden kernels. Mirrors ``_pykernels`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

BACKEND = "cython"

ctypedef cnp.int64_t i64


def move_nodes_fast(const i64[::1] indptr, const i64[::1] indices, const double[::1] weights,
                    const double[::1] node_k, i64[::1] membership, const i64[::1] order,
                    double gamma, double m, double eps):
    cdef Py_ssize_t n = node_k.shape[0]
    cdef double two_m2 = 2.0 * m * m
    cdef double[::1] comm_k = np.zeros(n, dtype=np.float64)
    cdef i64[::1] comm_size = np.zeros(n, dtype=np.int64)
    cdef i64[::1] empty = np.empty(n, dtype=np.int64)
    cdef double[::1] neigh_w = np.zeros(n, dtype=np.float64)
    cdef cnp.uint8_t[::1] seen = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] cands = np.empty(n, dtype=np.int64)
    cdef i64[::1] queue = np.empty(n, dtype=np.int64)
    cdef cnp.uint8_t[::1] in_queue = np.ones(n, dtype=np.uint8)
    cdef Py_ssize_t head = 0, size = n, n_empty = 0, n_cands, i, p, v, u, c, c_old, best
    cdef double kv, stay, best_gain, g
    cdef long moves = 0

    for v in range(n):
        comm_k[membership[v]] += node_k[v]
        comm_size[membership[v]] += 1
    for c in range(n - 1, -1, -1):
        if comm_size[c] == 0:
            empty[n_empty] = c
            n_empty += 1
    for i in range(n):
        queue[i] = order[i]

    while size > 0:
        v = queue[head]
        head = (head + 1) % n
        size -= 1
        in_queue[v] = 0

        c_old = membership[v]
        kv = node_k[v]
        n_cands = 0
        for p in range(indptr[v], indptr[v + 1]):
            c = membership[indices[p]]
            if not seen[c]:
                seen[c] = 1
                cands[n_cands] = c
                n_cands += 1
            neigh_w[c] += weights[p]

        comm_k[c_old] -= kv
        comm_size[c_old] -= 1
        stay = neigh_w[c_old] / m - gamma * (kv * comm_k[c_old]) / two_m2
        best = c_old
        best_gain = stay
        for i in range(n_cands):
            c = cands[i]
            if c == c_old:
                continue
            g = neigh_w[c] / m - gamma * (kv * comm_k[c]) / two_m2
            if g > best_gain:
                best = c
                best_gain = g
        if comm_size[c_old] > 0 and 0.0 > best_gain:
            best = empty[n_empty - 1]
            best_gain = 0.0
        if best != c_old and not (best_gain - stay > eps):
            best = c_old

        for i in range(n_cands):
            c = cands[i]
            neigh_w[c] = 0.0
            seen[c] = 0

        if best != c_old:
            if comm_size[best] == 0:
                n_empty -= 1
            if comm_size[c_old] == 0:
                empty[n_empty] = c_old
                n_empty += 1
            membership[v] = best
            moves += 1
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if not in_queue[u] and membership[u] != best:
                    queue[(head + size) % n] = u
                    size += 1
                    in_queue[u] = 1
        comm_k[best] += kv
        comm_size[best] += 1

    return moves


def refine_partition(const i64[::1] indptr, const i64[::1] indices, const double[::1] weights,
                     const double[::1] node_k, const i64[::1] membership, const i64[::1] order,
                     const double[::1] uniforms, double gamma, double theta, double m, double scale):
    cdef Py_ssize_t n = node_k.shape[0]
    cdef double two_m2 = 2.0 * m * m
    cdef double[::1] comm_k = np.zeros(n, dtype=np.float64)
    cdef double[::1] w_own = np.zeros(n, dtype=np.float64)
    out = np.arange(n, dtype=np.int64)
    cdef i64[::1] refined = out
    cdef double[::1] r_k = np.array(node_k, dtype=np.float64)
    cdef double[::1] r_ext = np.zeros(n, dtype=np.float64)
    cdef i64[::1] r_size = np.ones(n, dtype=np.int64)
    cdef double[::1] w_to = np.zeros(n, dtype=np.float64)
    cdef cnp.uint8_t[::1] seen = np.zeros(n, dtype=np.uint8)
    cdef i64[::1] cands = np.empty(n, dtype=np.int64)
    cdef i64[::1] options = np.empty(n + 1, dtype=np.int64)
    cdef double[::1] gains = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] probs = np.empty(n + 1, dtype=np.float64)
    cdef Py_ssize_t pos, p, v, u, t, c, i, n_cands, n_opt, chosen
    cdef double kv, kc, acc, g, top, total, r, x

    for v in range(n):
        comm_k[membership[v]] += node_k[v]
    for v in range(n):
        c = membership[v]
        acc = 0.0
        for p in range(indptr[v], indptr[v + 1]):
            if membership[indices[p]] == c:
                acc += weights[p]
        w_own[v] = acc
        r_ext[v] = acc

    for pos in range(n):
        v = order[pos]
        if refined[v] != v or r_size[v] != 1:
            continue
        c = membership[v]
        kv = node_k[v]
        kc = comm_k[c]
        if not (w_own[v] / m >= gamma * (kv * (kc - kv)) / two_m2):
            continue

        n_cands = 0
        for p in range(indptr[v], indptr[v + 1]):
            u = indices[p]
            if membership[u] != c:
                continue
            t = refined[u]
            if not seen[t]:
                seen[t] = 1
                cands[n_cands] = t
                n_cands += 1
            w_to[t] += weights[p]

        options[0] = v
        gains[0] = 0.0
        n_opt = 1
        for i in range(n_cands):
            t = cands[i]
            if t == v:
                continue
            if not (r_ext[t] / m >= gamma * (r_k[t] * (kc - r_k[t])) / two_m2):
                continue
            g = w_to[t] / m - gamma * (kv * r_k[t]) / two_m2
            if g >= 0.0:
                options[n_opt] = t
                gains[n_opt] = g
                n_opt += 1

        chosen = v
        if n_opt > 1:
            top = gains[0]
            for i in range(n_opt):
                if gains[i] > top:
                    top = gains[i]
            total = 0.0
            for i in range(n_opt):
                x = exp((gains[i] - top) * scale / theta)
                probs[i] = x
                total += x
            r = uniforms[pos] * total
            acc = 0.0
            chosen = options[n_opt - 1]
            for i in range(n_opt):
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

        for i in range(n_cands):
            t = cands[i]
            w_to[t] = 0.0
            seen[t] = 0

    return out
