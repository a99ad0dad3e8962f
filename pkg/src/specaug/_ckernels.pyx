# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled traversal kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

cnp.import_array()

ctypedef cnp.int64_t i64


def _as_i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def bfs_ball(row_offsets, col_indices, i64 center, i64 radius):
    cdef const i64[::1] offs = _as_i64(row_offsets)
    cdef const i64[::1] cols = _as_i64(col_indices)
    cdef unordered_map[i64, i64] dist
    cdef vector[i64] order
    cdef size_t head = 0
    cdef i64 u, v, d, k
    dist[center] = 0
    order.push_back(center)
    while head < order.size():
        u = order[head]
        head += 1
        d = dist[u]
        if d >= radius:
            continue
        for k in range(offs[u], offs[u + 1]):
            v = cols[k]
            if dist.count(v) == 0:
                dist[v] = d + 1
                order.push_back(v)
    out = np.empty(order.size(), dtype=np.int64)
    cdef i64[::1] o = out
    for k in range(<i64>order.size()):
        o[k] = order[k]
    return out


def random_walk_visit(row_offsets, col_indices, i64 start, restart_u, step_u,
                      double return_prob, i64 max_nodes):
    cdef const i64[::1] offs = _as_i64(row_offsets)
    cdef const i64[::1] cols = _as_i64(col_indices)
    cdef const double[::1] ru = np.ascontiguousarray(restart_u, dtype=np.float64)
    cdef const double[::1] su = np.ascontiguousarray(step_u, dtype=np.float64)
    cdef unordered_set[i64] seen
    cdef vector[i64] visited
    cdef i64 cur = start, lo, deg, j, t, steps = ru.shape[0]
    seen.insert(start)
    visited.push_back(start)
    for t in range(steps):
        if <i64>visited.size() >= max_nodes:
            break
        if ru[t] < return_prob:
            cur = start
            continue
        lo = offs[cur]
        deg = offs[cur + 1] - lo
        if deg == 0:
            break
        j = <i64>(su[t] * deg)
        if j >= deg:
            j = deg - 1
        cur = cols[lo + j]
        if seen.count(cur) == 0:
            seen.insert(cur)
            visited.push_back(cur)
    out = np.empty(visited.size(), dtype=np.int64)
    cdef i64[::1] o = out
    for t in range(<i64>visited.size()):
        o[t] = visited[t]
    return out


def induced_csr(row_offsets, col_indices, nodes):
    cdef const i64[::1] offs = _as_i64(row_offsets)
    cdef const i64[::1] cols = _as_i64(col_indices)
    cdef const i64[::1] nd = _as_i64(nodes)
    cdef i64 n = nd.shape[0], i, k, v, start
    cdef unordered_map[i64, i64] local
    cdef vector[i64] new_cols
    cdef unordered_map[i64, i64].iterator it
    new_offsets = np.empty(n + 1, dtype=np.int64)
    cdef i64[::1] no = new_offsets
    for i in range(n):
        local[nd[i]] = i
    no[0] = 0
    for i in range(n):
        start = <i64>new_cols.size()
        for k in range(offs[nd[i]], offs[nd[i] + 1]):
            it = local.find(cols[k])
            if it != local.end():
                new_cols.push_back(local[cols[k]])
        sort(new_cols.begin() + start, new_cols.end())
        no[i + 1] = <i64>new_cols.size()
    out = np.empty(new_cols.size(), dtype=np.int64)
    cdef i64[::1] o = out
    for k in range(<i64>new_cols.size()):
        o[k] = new_cols[k]
    return new_offsets, out


def component_labels(row_offsets, col_indices):
    cdef const i64[::1] offs = _as_i64(row_offsets)
    cdef const i64[::1] cols = _as_i64(col_indices)
    cdef i64 n = offs.shape[0] - 1, s, u, v, k, current = 0
    cdef vector[i64] queue
    cdef size_t head
    labels = np.full(n, -1, dtype=np.int64)
    cdef i64[::1] lab = labels
    for s in range(n):
        if lab[s] != -1:
            continue
        lab[s] = current
        queue.clear()
        queue.push_back(s)
        head = 0
        while head < queue.size():
            u = queue[head]
            head += 1
            for k in range(offs[u], offs[u + 1]):
                v = cols[k]
                if lab[v] == -1:
                    lab[v] = current
                    queue.push_back(v)
        current += 1
    return labels
