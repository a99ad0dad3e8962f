"""Pure-Python traversal kernels.

Mirror of ``_ckernels.pyx``; every function takes CSR arrays and returns
int64 numpy arrays so the two backends are interchangeable.
"""
from collections import deque

import numpy as np


def bfs_ball(row_offsets, col_indices, center, radius):
    """Nodes within ``radius`` hops of ``center``, in BFS discovery order."""
    offs = row_offsets.tolist()
    cols = col_indices
    seen = {center: 0}
    order = [center]
    queue = deque([center])
    while queue:
        u = queue.popleft()
        d = seen[u]
        if d >= radius:
            continue
        for v in cols[offs[u]:offs[u + 1]].tolist():
            if v not in seen:
                seen[v] = d + 1
                order.append(v)
                queue.append(v)
    return np.asarray(order, dtype=np.int64)


def random_walk_visit(row_offsets, col_indices, start, restart_u, step_u,
                      return_prob, max_nodes):
    """Distinct nodes of a walk with restart, in first-visit order.

    ``restart_u`` and ``step_u`` hold one uniform draw per step: the first
    decides the jump back to ``start``, the second picks the neighbour.
    """
    offs = row_offsets.tolist()
    visited = [start]
    seen = {start}
    cur = start
    for t in range(len(restart_u)):
        if len(visited) >= max_nodes:
            break
        if restart_u[t] < return_prob:
            cur = start
            continue
        lo = offs[cur]
        deg = offs[cur + 1] - lo
        if deg == 0:
            break
        j = int(step_u[t] * deg)
        if j >= deg:
            j = deg - 1
        cur = int(col_indices[lo + j])
        if cur not in seen:
            seen.add(cur)
            visited.append(cur)
    return np.asarray(visited, dtype=np.int64)


def induced_csr(row_offsets, col_indices, nodes):
    """CSR arrays of the subgraph induced on ``nodes`` (local ids follow ``nodes``)."""
    local = {int(v): i for i, v in enumerate(nodes.tolist())}
    offs = row_offsets.tolist()
    new_offsets = [0]
    new_cols = []
    for v in nodes.tolist():
        row = []
        for u in col_indices[offs[v]:offs[v + 1]].tolist():
            j = local.get(u)
            if j is not None:
                row.append(j)
        row.sort()
        new_cols.extend(row)
        new_offsets.append(len(new_cols))
    return (np.asarray(new_offsets, dtype=np.int64),
            np.asarray(new_cols, dtype=np.int64))


def component_labels(row_offsets, col_indices):
    """Connected-component label per node, numbered in BFS order from node 0."""
    n = len(row_offsets) - 1
    offs = row_offsets.tolist()
    labels = [-1] * n
    current = 0
    for s in range(n):
        if labels[s] != -1:
            continue
        labels[s] = current
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in col_indices[offs[u]:offs[u + 1]].tolist():
                if labels[v] == -1:
                    labels[v] = current
                    queue.append(v)
        current += 1
    return np.asarray(labels, dtype=np.int64)
