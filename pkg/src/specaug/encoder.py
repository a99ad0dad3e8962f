"""Five-layer GIN encoder with sum readout and hand-written reverse mode.

Node states start as a linear projection of the input features. Each layer
computes ``MLP((1 + eps) h_v + sum_{u in N(v)} h_u)`` with a two-layer ReLU
MLP; every layer but the last applies a ReLU to the MLP output. The graph
representation is the L2-normalized sum of the final node states.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from specaug.spectral import pad_columns

DEFAULT_POS_DIM = 64
DEFAULT_DEGREE_BUCKETS = 16
DEFAULT_HIDDEN = 64
DEFAULT_LAYERS = 5


@dataclass(eq=False)
class GinParams:
    """Named parameter arrays plus the feature layout they expect.

    ``arrays`` keys: ``proj_W``, ``proj_b`` and, per layer ``l``,
    ``W1_l``, ``b1_l``, ``W2_l``, ``b2_l``. ``eps`` is fixed (not trained).
    """

    arrays: dict
    eps: np.ndarray
    pos_dim: int
    degree_buckets: int
    hidden_dim: int
    num_layers: int

    @property
    def input_dim(self):
        return self.pos_dim + self.degree_buckets

    def names(self):
        return list(self.arrays)

    def copy(self):
        return GinParams({k: v.copy() for k, v in self.arrays.items()}, self.eps.copy(),
                         self.pos_dim, self.degree_buckets, self.hidden_dim, self.num_layers)

    def zeros_like(self):
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def num_parameters(self):
        return sum(v.size for v in self.arrays.values())


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(input_dim=None, hidden_dim=DEFAULT_HIDDEN, rng_seed=0, num_layers=DEFAULT_LAYERS,
                pos_dim=DEFAULT_POS_DIM, degree_buckets=DEFAULT_DEGREE_BUCKETS):
    """Glorot-uniform weights, zero biases, ``eps = 0``.

    ``input_dim`` defaults to ``pos_dim + degree_buckets``; if given it must
    match that sum.
    """
    if input_dim is None:
        input_dim = pos_dim + degree_buckets
    if input_dim != pos_dim + degree_buckets:
        raise ValueError(f"input_dim={input_dim} but pos_dim + degree_buckets = "
                         f"{pos_dim + degree_buckets}")
    if min(input_dim, hidden_dim, num_layers) < 1:
        raise ValueError("dimensions and layer count must be at least 1")
    rng = np.random.default_rng(rng_seed)
    h = hidden_dim
    arrays = {"proj_W": _glorot(rng, input_dim, h), "proj_b": np.zeros(h)}
    for l in range(num_layers):
        arrays[f"W1_{l}"] = _glorot(rng, h, h)
        arrays[f"b1_{l}"] = np.zeros(h)
        arrays[f"W2_{l}"] = _glorot(rng, h, h)
        arrays[f"b2_{l}"] = np.zeros(h)
    return GinParams(arrays, np.zeros(num_layers), pos_dim, degree_buckets, h, num_layers)


def degree_one_hot(degrees, buckets=DEFAULT_DEGREE_BUCKETS):
    d = np.minimum(np.asarray(degrees, dtype=np.int64), buckets - 1)
    out = np.zeros((len(d), buckets))
    out[np.arange(len(d)), d] = 1.0
    return out


def node_features(view, degree_buckets=DEFAULT_DEGREE_BUCKETS, pos_dim=DEFAULT_POS_DIM):
    """Positional columns (padded or cut to ``pos_dim``) then a degree one-hot."""
    pos = pad_columns(np.asarray(view.features, dtype=np.float64), pos_dim)
    return np.hstack([pos, degree_one_hot(view.graph.degrees, degree_buckets)])


@dataclass(eq=False)
class GraphBatch:
    """Block-diagonal union of several graphs ready for one forward pass."""

    adjacency: sp.csr_matrix
    features: np.ndarray
    readout: sp.csr_matrix  # graphs x nodes, ones on each graph's nodes

    @property
    def num_graphs(self):
        return self.readout.shape[0]


def make_batch(graphs, features):
    """Batch from parallel lists of graphs and node-feature matrices."""
    if len(graphs) != len(features):
        raise ValueError("one feature matrix per graph is required")
    sizes = np.array([g.num_nodes for g in graphs], dtype=np.int64)
    total = int(sizes.sum())
    node_base = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    nnz = np.array([len(g.col_indices) for g in graphs], dtype=np.int64)
    edge_base = np.concatenate([[0], np.cumsum(nnz)]).astype(np.int64)
    cols = np.concatenate([g.col_indices + b for g, b in zip(graphs, node_base)]) \
        if graphs else np.zeros(0, dtype=np.int64)
    offsets = np.concatenate([[0]] + [g.row_offsets[1:] + e for g, e in zip(graphs, edge_base)])
    adjacency = sp.csr_matrix((np.ones(len(cols)), cols, offsets), shape=(total, total))
    owner = np.repeat(np.arange(len(graphs)), sizes)
    readout = sp.csr_matrix((np.ones(total), (owner, np.arange(total))),
                            shape=(len(graphs), total))
    X = np.vstack(features) if len(features) else np.zeros((0, 0))
    return GraphBatch(adjacency, X, readout)


def batch_views(views, params):
    return make_batch([v.graph for v in views],
                      [node_features(v, params.degree_buckets, params.pos_dim) for v in views])


def forward_batch(params, batch, dropout=0.0, rng=None):
    """Representations for every graph in ``batch`` and the cache for backprop.

    ``dropout`` zeroes MLP hidden units with inverted scaling; it needs
    ``rng`` (a seed or Generator).
    """
    X = batch.features
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise ValueError(f"features have width {X.shape[-1]}, encoder expects {params.input_dim}")
    if dropout and not 0.0 <= dropout < 1.0:
        raise ValueError("dropout must lie in [0, 1)")
    if dropout:
        rng = np.random.default_rng(rng)
    P = params.arrays
    A = batch.adjacency
    H = X @ P["proj_W"] + P["proj_b"]
    layers = []
    for l in range(params.num_layers):
        Z = (1.0 + params.eps[l]) * H + A @ H
        a1 = Z @ P[f"W1_{l}"] + P[f"b1_{l}"]
        r1 = np.maximum(a1, 0.0)
        mask = None
        if dropout:
            mask = (rng.random(r1.shape) >= dropout) / (1.0 - dropout)
            r1 = r1 * mask
        a2 = r1 @ P[f"W2_{l}"] + P[f"b2_{l}"]
        layers.append((Z, a1, r1, mask, a2))
        H = np.maximum(a2, 0.0) if l < params.num_layers - 1 else a2
    R = batch.readout @ H
    norms = np.linalg.norm(R, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    Y = np.where(norms[:, None] > 0.0, R / safe[:, None], 0.0)
    cache = dict(layers=layers, R=R, norms=norms, Y=Y, batch=batch)
    return Y, cache


def backward_batch(params, cache, dY):
    """Gradients of ``sum(dY * Y)`` with respect to every parameter array."""
    P = params.arrays
    batch = cache["batch"]
    Y, norms = cache["Y"], cache["norms"]
    safe = np.where(norms > 0.0, norms, 1.0)
    dR = (dY - Y * np.sum(Y * dY, axis=1, keepdims=True)) / safe[:, None]
    dR[norms == 0.0] = 0.0
    dH = batch.readout.T @ dR
    A = batch.adjacency  # symmetric, so it is its own transpose
    grads = {}
    for l in reversed(range(params.num_layers)):
        Z, a1, r1, mask, a2 = cache["layers"][l]
        da2 = dH * (a2 > 0.0) if l < params.num_layers - 1 else dH
        grads[f"W2_{l}"] = r1.T @ da2
        grads[f"b2_{l}"] = da2.sum(axis=0)
        dr1 = da2 @ P[f"W2_{l}"].T
        if mask is not None:
            dr1 = dr1 * mask
        da1 = dr1 * (a1 > 0.0)
        grads[f"W1_{l}"] = Z.T @ da1
        grads[f"b1_{l}"] = da1.sum(axis=0)
        dZ = da1 @ P[f"W1_{l}"].T
        dH = (1.0 + params.eps[l]) * dZ + A @ dZ
    grads["proj_W"] = batch.features.T @ dH
    grads["proj_b"] = dH.sum(axis=0)
    return {k: grads[k] for k in P}


def encode_views(params, views):
    """Normalized representations of ``views`` (inference, no dropout)."""
    if not views:
        return np.zeros((0, params.hidden_dim))
    Y, _ = forward_batch(params, batch_views(views, params))
    return Y


def gin_forward(params, view):
    """Unit-length (or zero) representation of a single view."""
    return encode_views(params, [view])[0]


def readout_unnormalized(params, view):
    _, cache = forward_batch(params, batch_views([view], params))
    return cache["R"][0]
