"""Whole-graph node embeddings from a log-transformed diffusion matrix.

The matrix is ``log(scale * D^-1/2 (P + P^2 + ... + P^r) D^-1/2)`` with
``P = D^-1/2 A D^-1/2``, which equals ``log(scale * sum_j (D^-1 A)^j D^-1)``.
With ``r = 1`` this is the LINE factorization; ``scale`` stands in for the
volume / negative-sampling factor and defaults to 1 (omitted).
"""
from dataclasses import dataclass

import numpy as np

from specaug.graph import Graph
from specaug.spectral import canonicalize_signs

DENSE_CAP = 4096
DEFAULT_LOG_FLOOR = 1e-8
DEFAULT_WINDOW = 1
DEFAULT_DIM = 32


@dataclass(frozen=True, eq=False)
class GlobalEmbedding:
    matrix: np.ndarray
    window: int
    dim: int

    @property
    def num_nodes(self):
        return self.matrix.shape[0]


def _dense_adjacency(g):
    if isinstance(g, Graph):
        if g.num_nodes > DENSE_CAP:
            raise ValueError(f"graph has {g.num_nodes} nodes; dense factorization is capped at {DENSE_CAP}")
        return g.adjacency().toarray()
    adj = np.asarray(g, dtype=np.float64)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("weighted adjacency must be a square matrix")
    if adj.shape[0] > DENSE_CAP:
        raise ValueError(f"matrix has {adj.shape[0]} rows; dense factorization is capped at {DENSE_CAP}")
    return adj


def netmf_matrix(g, window=DEFAULT_WINDOW, log_floor=DEFAULT_LOG_FLOOR, scale=1.0):
    """Element-wise log of the windowed diffusion matrix, symmetrized.

    ``g`` is a :class:`Graph` or a dense symmetric (possibly weighted)
    adjacency. Entries below ``log_floor`` are clipped before the log.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    adj = _dense_adjacency(g)
    deg = adj.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    P = dinv[:, None] * adj * dinv[None, :]
    power = P.copy()
    total = P.copy()
    for _ in range(window - 1):
        power = power @ P
        total += power
    M = scale * (dinv[:, None] * total * dinv[None, :])
    M = np.log(np.maximum(M, log_floor))
    return (M + M.T) / 2.0


def factorize_global(M, dim=DEFAULT_DIM, window=DEFAULT_WINDOW):
    """Rows ``U_d |Lambda_d|^1/2`` over the ``dim`` largest-magnitude eigenpairs.

    Each row is then scaled to unit length; all-zero rows stay zero.
    """
    vals, vecs = magnitude_eigenpairs(M, dim)
    rows = vecs * np.sqrt(np.abs(vals))
    return GlobalEmbedding(normalize_rows(rows), window, dim)


def magnitude_eigenpairs(M, dim):
    """The ``dim`` eigenpairs of symmetric ``M`` with largest ``|eigenvalue|``."""
    M = np.asarray(M, dtype=np.float64)
    n = M.shape[0]
    if not 1 <= dim <= n:
        raise ValueError(f"dim={dim} must lie in [1, {n}]")
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(-np.abs(vals), kind="stable")[:dim]
    return vals[order], canonicalize_signs(vecs[:, order])


def normalize_rows(x, eps=1e-300):
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.where(norms > eps, x / np.where(norms > eps, norms, 1.0), 0.0)


def embed_graph(g, dim=DEFAULT_DIM, window=DEFAULT_WINDOW, log_floor=DEFAULT_LOG_FLOOR):
    """Global embedding of a whole graph (``dim`` is clipped to the node count)."""
    M = netmf_matrix(g, window, log_floor)
    return factorize_global(M, min(dim, M.shape[0]), window)


def view_summary(E, node_map):
    """Sum of the global-embedding rows of the nodes in a view."""
    matrix = E.matrix if isinstance(E, GlobalEmbedding) else np.asarray(E)
    idx = np.asarray(node_map, dtype=np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= matrix.shape[0]):
        raise IndexError("view node id outside the global embedding")
    return matrix[idx].sum(axis=0)
