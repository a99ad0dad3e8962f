"""Immutable undirected graphs in CSR form and the structural view primitives."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from specaug import kernels

DEFAULT_WALK_STEPS = 256
DEFAULT_MAX_NODES = 256
DEFAULT_RETURN_PROB = 0.8


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted graph.

    ``col_indices[row_offsets[u]:row_offsets[u + 1]]`` are the neighbours of
    ``u`` in ascending order. A self-loop appears once in its row and counts
    once towards the degree.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    @classmethod
    def from_csr(cls, row_offsets, col_indices):
        row_offsets = _frozen(row_offsets)
        return cls(len(row_offsets) - 1, row_offsets, _frozen(col_indices),
                   _frozen(np.diff(row_offsets)))

    @property
    def num_edges(self):
        loops = self.num_self_loops
        return (len(self.col_indices) - loops) // 2 + loops

    @property
    def num_self_loops(self):
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        return int(np.count_nonzero(rows == self.col_indices))

    def neighbors(self, u):
        return self.col_indices[self.row_offsets[u]:self.row_offsets[u + 1]]

    def has_edge(self, u, v):
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return bool(i < len(row) and row[i] == v)

    def edges(self):
        """Edge list with ``u <= v``, one row per undirected edge."""
        rows = np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees)
        keep = rows <= self.col_indices
        return np.stack([rows[keep], self.col_indices[keep]], axis=1)

    def adjacency(self, dtype=np.float64):
        data = np.ones(len(self.col_indices), dtype=dtype)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.num_nodes, self.num_nodes))

    def same_structure(self, other):
        return (self.num_nodes == other.num_nodes
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    def __repr__(self):
        return f"Graph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


def from_edge_pairs(pairs, num_nodes, allow_self_loops=False):
    """Build a deduplicated, symmetrized graph from ``(u, v)`` pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) and (pairs.min() < 0 or pairs.max() >= num_nodes):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= num_nodes).any(axis=1)][0]
        raise ValueError(f"edge ({bad[0]}, {bad[1]}) references a node outside [0, {num_nodes})")
    if not allow_self_loops:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    both = np.concatenate([pairs, pairs[:, ::-1]])
    keys = np.unique(both[:, 0] * num_nodes + both[:, 1])
    rows, cols = np.divmod(keys, num_nodes) if num_nodes else (keys, keys)
    offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=num_nodes), out=offsets[1:])
    return Graph.from_csr(offsets, cols)


def from_dense(adj):
    """Graph from a dense 0/1 symmetric matrix (non-zero diagonal kept as loops)."""
    adj = np.asarray(adj)
    rows, cols = np.nonzero(adj)
    return from_edge_pairs(np.stack([rows, cols], axis=1), adj.shape[0], allow_self_loops=True)


def induced_subgraph(g, nodes):
    """Subgraph induced on ``nodes``; local id ``i`` is ``nodes[i]``."""
    nodes = np.asarray(nodes, dtype=np.int64)
    offsets, cols = kernels.induced_csr(g.row_offsets, g.col_indices, nodes)
    return Graph.from_csr(offsets, cols)


def _check_node(g, v):
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range for graph with {g.num_nodes} nodes")


def ego_network(g, center, radius):
    """Induced subgraph on every node within ``radius`` hops of ``center``.

    Returns ``(subgraph, node_map)``; the centre is local node 0 and the
    rest follow BFS discovery order.
    """
    _check_node(g, center)
    if radius < 0:
        raise ValueError("radius must be non-negative")
    nodes = kernels.bfs_ball(g.row_offsets, g.col_indices, int(center), int(radius))
    return induced_subgraph(g, nodes), nodes


def random_walk_subgraph(g, start, steps=DEFAULT_WALK_STEPS, return_prob=DEFAULT_RETURN_PROB,
                         max_nodes=DEFAULT_MAX_NODES, rng_seed=None):
    """Induced subgraph on the distinct nodes of a random walk with return.

    At each step the walker jumps back to ``start`` with probability
    ``return_prob``, otherwise it moves to a uniform neighbour. The walk stops
    after ``steps`` steps, at a node without neighbours, or once ``max_nodes``
    distinct nodes have been seen. ``rng_seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    nodes = walk_nodes(g, start, steps, return_prob, max_nodes, rng_seed)
    return induced_subgraph(g, nodes), nodes


def walk_nodes(g, start, steps=DEFAULT_WALK_STEPS, return_prob=DEFAULT_RETURN_PROB,
               max_nodes=DEFAULT_MAX_NODES, rng_seed=None):
    """Distinct nodes visited by the walk of :func:`random_walk_subgraph`, start first."""
    _check_node(g, start)
    if not 0.0 <= return_prob <= 1.0:
        raise ValueError("return_prob must lie in [0, 1]")
    rng = np.random.default_rng(rng_seed)
    draws = rng.random((2, steps))
    return kernels.random_walk_visit(g.row_offsets, g.col_indices, int(start), draws[0],
                                     draws[1], float(return_prob), int(max_nodes))


def path_graph(n):
    if n < 1:
        raise ValueError("path graph needs at least one node")
    i = np.arange(n - 1)
    return from_edge_pairs(np.stack([i, i + 1], axis=1), n)


def cycle_graph(n):
    if n < 3:
        raise ValueError("cycle graph needs at least three nodes")
    i = np.arange(n)
    return from_edge_pairs(np.stack([i, (i + 1) % n], axis=1), n)


def complete_graph(n):
    iu, ju = np.triu_indices(n, k=1)
    return from_edge_pairs(np.stack([iu, ju], axis=1), n)


def disjoint_union(*graphs):
    pairs, offset = [], 0
    for h in graphs:
        pairs.append(h.edges() + offset)
        offset += h.num_nodes
    return from_edge_pairs(np.concatenate(pairs) if pairs else np.empty((0, 2)), offset,
                           allow_self_loops=True)


def product_graph(a, b):
    """Cartesian product; node ``(i, j)`` gets index ``i * b.num_nodes + j``."""
    if a.num_nodes == 0 or b.num_nodes == 0:
        raise ValueError("product of an empty graph")
    nb = b.num_nodes
    ea, eb = a.edges(), b.edges()
    ea = ea[ea[:, 0] != ea[:, 1]]
    eb = eb[eb[:, 0] != eb[:, 1]]
    j = np.arange(nb)
    i = np.arange(a.num_nodes)
    # (i, j) ~ (i', j) for (i, i') in a
    along_a = np.stack([(ea[:, 0, None] * nb + j).ravel(), (ea[:, 1, None] * nb + j).ravel()], axis=1)
    # (i, j) ~ (i, j') for (j, j') in b
    along_b = np.stack([(i[:, None] * nb + eb[:, 0]).ravel(), (i[:, None] * nb + eb[:, 1]).ravel()], axis=1)
    return from_edge_pairs(np.concatenate([along_a, along_b]), a.num_nodes * nb)


def connected_components(g):
    """Component label per node; labels ``0..k-1`` in order of first node."""
    return kernels.component_labels(g.row_offsets, g.col_indices)


def num_components(g):
    labels = connected_components(g)
    return int(labels.max()) + 1 if len(labels) else 0
