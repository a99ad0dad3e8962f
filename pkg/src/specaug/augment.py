"""Spectral view augmentations and the pipeline that composes them.

Pipeline order for one positive pair: ego net, two random walks (optionally
re-drawn until the similarity filter passes), independent crops, optional
Procrustes alignment to the global embedding, then per view either a mask,
a frequency reorder, or nothing.
"""
import math
from dataclasses import dataclass, replace

import numpy as np

from specaug.global_embed import view_summary
from specaug.graph import (DEFAULT_MAX_NODES, DEFAULT_RETURN_PROB, DEFAULT_WALK_STEPS,
                           ego_network, induced_subgraph, num_components, walk_nodes)
from specaug.spectral import (LAPLACIAN_KINDS, NORMALIZED, pad_columns, positional_embedding,
                              spectral_embedding)

FILTER_MODES = ("similar", "diverse", "off")
# relative slack when comparing eigenvector entries to crop thresholds
_CROP_TIE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class View:
    """A subgraph with its node features.

    ``eigenvalues`` pair with the leading feature columns (ascending);
    ``node_map[i]`` is the id of local node ``i`` in the parent graph.
    """

    graph: object
    features: np.ndarray
    node_map: np.ndarray
    eigenvalues: np.ndarray
    history: tuple = ()

    @property
    def num_nodes(self):
        return self.graph.num_nodes


@dataclass(frozen=True)
class CropSpec:
    quantiles: tuple
    probability: float = 0.0

    def __post_init__(self):
        if len(self.quantiles) != 4:
            raise ValueError("crop quantiles are (x_min, x_max, y_min, y_max)")
        x0, x1, y0, y1 = self.quantiles
        if not all(0.0 <= q <= 1.0 for q in self.quantiles):
            raise ValueError("crop quantiles must lie in [0, 1]")
        if x0 > x1 or y0 > y1:
            raise ValueError("crop quantiles need min <= max")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("crop probability must lie in [0, 1]")


DEFAULT_CROPS = (
    CropSpec((0.2, 0.8, 0.2, 0.8), 0.1),
    CropSpec((0.1, 0.9, 0.1, 0.9), 0.1),
    CropSpec((0.0, 0.8, 0.0, 0.8), 0.05),
    CropSpec((0.2, 1.0, 0.2, 1.0), 0.05),
)


@dataclass
class AugmentationConfig:
    p_filter: float = 0.5
    p_align: float = 0.5
    p_mask: float = 0.25
    p_reorder: float = 0.25
    filter_mode: str = "similar"
    filter_c: float = 0.3
    t_max: int = 5
    crop_specs: tuple = DEFAULT_CROPS
    r_max: int = 10
    mask_M: int = None
    walk_steps: int = DEFAULT_WALK_STEPS
    return_prob: float = DEFAULT_RETURN_PROB
    max_nodes: int = DEFAULT_MAX_NODES
    ego_radius: int = 2
    embed_dim: int = 64
    laplacian_kind: str = NORMALIZED

    def __post_init__(self):
        self.crop_specs = tuple(self.crop_specs)
        for name in ("p_filter", "p_align", "p_mask", "p_reorder", "filter_c", "return_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} must lie in [0, 1]")
        if self.p_mask + self.p_reorder > 1.0 + 1e-12:
            raise ValueError("p_mask + p_reorder must not exceed 1")
        if sum(s.probability for s in self.crop_specs) > 1.0 + 1e-12:
            raise ValueError("crop probabilities must sum to at most 1")
        if self.filter_mode not in FILTER_MODES:
            raise ValueError(f"filter_mode must be one of {FILTER_MODES}")
        if self.laplacian_kind not in LAPLACIAN_KINDS:
            raise ValueError(f"laplacian_kind must be one of {LAPLACIAN_KINDS}")
        if self.t_max < 1 or self.r_max < 1 or self.embed_dim < 1 or self.max_nodes < 1:
            raise ValueError("t_max, r_max, embed_dim and max_nodes must be positive")
        if self.mask_M is None:
            self.mask_M = math.ceil(self.embed_dim / 2)
        if not 0 <= self.mask_M <= self.embed_dim:
            raise ValueError("mask_M must lie in [0, embed_dim]")

    @classmethod
    def disabled(cls, **overrides):
        """Random walks only: every optional step switched off."""
        base = dict(p_filter=0.0, p_align=0.0, p_mask=0.0, p_reorder=0.0,
                    filter_mode="off", crop_specs=())
        base.update(overrides)
        return cls(**base)


def make_view(g, node_map, dim):
    feats, eigs = positional_embedding(g, dim, return_eigenvalues=True)
    return View(g, feats, np.asarray(node_map, dtype=np.int64), eigs)


def quantile_threshold(sorted_values, p):
    """Value at rank ``ceil(p * N)`` (1-based); the ends map to -inf / +inf."""
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    n = len(sorted_values)
    rank = max(1, math.ceil(p * n - 1e-9))
    return sorted_values[rank - 1]


def crop_mask(x, y, quantiles):
    """Boolean mask of nodes inside the quantile window on ``(x, y)``."""
    x0, x1, y0, y1 = quantiles
    xs, ys = np.sort(x), np.sort(y)
    tx = _CROP_TIE_TOL * max(np.abs(x).max(), 1e-300)
    ty = _CROP_TIE_TOL * max(np.abs(y).max(), 1e-300)
    return ((x >= quantile_threshold(xs, x0) - tx) & (x <= quantile_threshold(xs, x1) + tx)
            & (y >= quantile_threshold(ys, y0) - ty) & (y <= quantile_threshold(ys, y1) + ty))


def spectral_crop(view, spec, kind=NORMALIZED):
    """Keep nodes whose lambda_2 / lambda_3 eigenvector values fall in the window.

    Views with fewer than 3 nodes, disconnected views, and crops that would
    remove every node are returned unchanged.
    """
    quantiles = spec.quantiles if isinstance(spec, CropSpec) else tuple(spec)
    g = view.graph
    if g.num_nodes < 3 or num_components(g) > 1:
        return view
    emb = spectral_embedding(g, 3, kind)
    keep = crop_mask(emb.eigenvectors[:, 1], emb.eigenvectors[:, 2], quantiles)
    if keep.all() or not keep.any():
        return view
    local = np.flatnonzero(keep)
    sub = induced_subgraph(g, local)
    cropped = make_view(sub, view.node_map[local], view.features.shape[1])
    return replace(cropped, history=view.history + (f"crop{list(quantiles)}",))


def reorder_permutation(eigenvalues, k, r):
    """Column order for the order-``r`` diffusion embedding.

    Takes the ``k`` columns with the largest ``1 - lambda`` (the smallest
    eigenvalues) and sorts them by descending ``sum_{j=1..r} (1 - lambda)^j``.
    The result indexes into those ``k`` columns.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if k > len(lam):
        raise ValueError("k exceeds the number of eigenvalues")
    chosen = np.argsort(lam, kind="stable")[:k]
    x = 1.0 - lam[chosen]
    key = np.zeros_like(x)
    term = np.ones_like(x)
    for _ in range(r):
        term = term * x
        key += term
    return chosen[np.argsort(-key, kind="stable")]


def reorder_view(view, r):
    k = len(view.eigenvalues)
    perm = reorder_permutation(view.eigenvalues, k, r)
    feats = view.features.copy()
    feats[:, :k] = view.features[:, perm]
    return replace(view, features=feats, history=view.history + (f"reorder(r={r})",))


def mask_columns(view, z):
    """Zero the ``z`` feature columns that pair with the largest eigenvalues."""
    k = len(view.eigenvalues)
    feats = view.features.copy()
    feats[:, max(0, k - z):k] = 0.0
    return replace(view, features=feats, history=view.history + (f"mask(z={z})",))


def apply_mask(view, M, rng_seed=None):
    """Mask a uniformly drawn number ``z`` in ``[0, M]`` of top-eigenvalue columns."""
    if M < 0 or M > view.features.shape[1]:
        raise ValueError("M must lie in [0, number of feature columns]")
    rng = np.random.default_rng(rng_seed)
    z = int(rng.integers(0, M + 1))
    return mask_columns(view, z)


def procrustes_align(features, bridge):
    """Orthogonal ``Q`` minimising ``||features @ Q - bridge||_F``.

    ``Q = U V^T`` from the SVD ``features^T bridge = U S V^T``; returns the
    aligned features and ``Q``. Reflections are allowed.
    """
    X = np.asarray(features, dtype=np.float64)
    N = np.asarray(bridge, dtype=np.float64)
    if X.shape != N.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {N.shape}")
    if not (np.isfinite(X).all() and np.isfinite(N).all()):
        raise ValueError("procrustes inputs must be finite")
    U, _, Vt = np.linalg.svd(X.T @ N)
    Q = U @ Vt
    return X @ Q, Q


def procrustes_apply(features, bridge):
    """``features @ Q`` for the Procrustes ``Q`` without forming ``Q``.

    With ``features^T = P R`` (thin QR), ``features^T bridge = P (R bridge)``,
    so the singular vectors that act on the row space of ``features`` come
    from the small SVD of ``R bridge``. Costs ``O(w n^2)`` instead of
    ``O(w^3)`` when a view has ``n < w`` nodes.
    """
    X = np.asarray(features, dtype=np.float64)
    N = np.asarray(bridge, dtype=np.float64)
    n, w = X.shape
    if n >= w:
        return procrustes_align(X, N)[0]
    if X.shape != N.shape:
        raise ValueError(f"shape mismatch {X.shape} vs {N.shape}")
    if not (np.isfinite(X).all() and np.isfinite(N).all()):
        raise ValueError("procrustes inputs must be finite")
    P, R = np.linalg.qr(X.T)
    A, _, Bt = np.linalg.svd(R @ N, full_matrices=False)
    return X @ P @ A @ Bt


def align_view(view, global_emb):
    """Replace features by their Procrustes fit to the view's bridge rows."""
    bridge = global_emb.matrix[view.node_map]
    width = view.features.shape[1]
    w = min(width, bridge.shape[1])
    aligned = procrustes_apply(view.features[:, :w], bridge[:, :w])
    return replace(view, features=pad_columns(aligned, width), history=view.history + ("align",))


def cosine(s1, s2):
    n1, n2 = np.linalg.norm(s1), np.linalg.norm(s2)
    if n1 == 0.0 or n2 == 0.0:
        return None
    return float(np.dot(s1, s2) / (n1 * n2))


def similarity_accept(s1, s2, c, mode="similar"):
    """Filter test on two view summaries against the threshold ``1 - c``.

    A zero summary cannot be scored and is accepted.
    """
    if mode == "off":
        return True
    if mode not in FILTER_MODES:
        raise ValueError(f"unknown filter mode {mode!r}")
    s1, s2 = np.asarray(s1, dtype=np.float64), np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise ValueError("summaries must have the same length")
    cos = cosine(s1, s2)
    if cos is None:
        return True
    return cos > 1.0 - c if mode == "similar" else cos <= 1.0 - c


def _pick_crop(specs, u):
    acc = 0.0
    for spec in specs:
        acc += spec.probability
        if u < acc:
            return spec
    return None


def generate_view_pair(g, center, cfg, global_emb=None, rng_seed=None):
    """Two augmented views around ``center``; deterministic given the seed."""
    rng = np.random.default_rng(rng_seed)
    if cfg.ego_radius is None:
        ego, ego_map = g, np.arange(g.num_nodes)
        start = int(center)
    else:
        ego, ego_map = ego_network(g, center, cfg.ego_radius)
        start = 0
    walk = dict(steps=cfg.walk_steps, return_prob=cfg.return_prob, max_nodes=cfg.max_nodes)

    use_filter = rng.random() < cfg.p_filter and cfg.filter_mode != "off" and global_emb is not None
    tries = cfg.t_max if use_filter else 1
    filtered = False
    for _ in range(tries):
        a = ego_map[walk_nodes(ego, start, rng_seed=rng, **walk)]
        b = ego_map[walk_nodes(ego, start, rng_seed=rng, **walk)]
        if not use_filter:
            break
        filtered = similarity_accept(view_summary(global_emb, a), view_summary(global_emb, b),
                                     cfg.filter_c, cfg.filter_mode)
        if filtered:
            break

    views = []
    for nodes in (a, b):
        v = make_view(induced_subgraph(g, nodes), nodes, cfg.embed_dim)
        if use_filter:
            v = replace(v, history=("filter:pass" if filtered else "filter:exhausted",))
        spec = _pick_crop(cfg.crop_specs, rng.random())
        if spec is not None:
            v = spectral_crop(v, spec, cfg.laplacian_kind)
        views.append(v)

    if rng.random() < cfg.p_align and global_emb is not None:
        views = [align_view(v, global_emb) for v in views]

    out = []
    for v in views:
        u = rng.random()
        if u < cfg.p_mask:
            v = apply_mask(v, cfg.mask_M, rng)
        elif u < cfg.p_mask + cfg.p_reorder:
            v = reorder_view(v, int(rng.integers(1, cfg.r_max + 1)))
        out.append(v)
    return out[0], out[1]
