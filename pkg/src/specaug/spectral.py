"""Laplacians, smallest eigenpairs and Laplacian positional features."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

NORMALIZED = "normalized"
UNNORMALIZED = "unnormalized"
LAPLACIAN_KINDS = (NORMALIZED, UNNORMALIZED)

DENSE_LIMIT = 4096
ITERATIVE_TOL = 1e-8
# entries within this of the column max count as tied for sign selection
_SIGN_TIE_TOL = 1e-10


class EigensolverError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    """Ascending eigenvalues with matching unit, sign-canonical eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    laplacian_kind: str

    def __len__(self):
        return len(self.eigenvalues)


def laplacian(g, kind=NORMALIZED):
    """Sparse ``D - A`` or ``I - D^-1/2 A D^-1/2``.

    Isolated nodes get a zero ``D^-1/2`` entry, so in the normalized form
    they contribute the eigenpair ``(1, e_v)``.
    """
    adj = g.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    n = g.num_nodes
    if kind == UNNORMALIZED:
        return (sp.diags(deg) - adj).tocsr()
    if kind != NORMALIZED:
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    scale = sp.diags(dinv)
    return (sp.identity(n, format="csr") - scale @ adj @ scale).tocsr()


def dense_laplacian(g, kind=NORMALIZED):
    """Dense form of :func:`laplacian`, cheaper for small graphs."""
    n = g.num_nodes
    adj = np.zeros((n, n))
    rows = np.repeat(np.arange(n), g.degrees)
    adj[rows, g.col_indices] = 1.0
    deg = adj.sum(axis=1)
    if kind == UNNORMALIZED:
        return np.diag(deg) - adj
    if kind != NORMALIZED:
        raise ValueError(f"unknown Laplacian kind {kind!r}")
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    return np.eye(n) - dinv[:, None] * adj * dinv[None, :]


def canonicalize_signs(vectors):
    """Flip columns so the largest-magnitude entry is positive.

    Near-ties (within 1e-10 of the column maximum) resolve to the lowest
    row index, so symmetric graphs get a reproducible sign.
    """
    vectors = np.array(vectors, dtype=np.float64, copy=True)
    if vectors.size == 0:
        return vectors
    mag = np.abs(vectors)
    top = mag.max(axis=0)
    pick = np.argmax(mag >= top - _SIGN_TIE_TOL * np.maximum(top, 1.0), axis=0)
    signs = np.sign(vectors[pick, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _dense(L):
    return L.toarray() if sp.issparse(L) else np.asarray(L, dtype=np.float64)


def eigen_residuals(L, eigenvalues, eigenvectors):
    """``||L v - lambda v||_2`` for each column."""
    Lv = L @ eigenvectors
    return np.linalg.norm(Lv - eigenvectors * eigenvalues, axis=0)


def smallest_k_eigs(L, k, kind=NORMALIZED):
    """The ``k`` smallest eigenpairs of a symmetric matrix.

    Dense LAPACK up to ``DENSE_LIMIT`` rows, Lanczos (ARPACK) above.
    """
    n = L.shape[0]
    if not 0 <= k <= n:
        raise ValueError(f"k={k} must lie in [0, {n}]")
    if k == 0:
        return SpectralEmbedding(np.empty(0), np.empty((n, 0)), kind)
    if n <= DENSE_LIMIT or k >= n - 1:
        vals, vecs = np.linalg.eigh(_dense(L))
        vals, vecs = vals[:k], vecs[:, :k]
    else:
        try:
            vals, vecs = spla.eigsh(sp.csr_matrix(L), k=k, which="SA", tol=ITERATIVE_TOL,
                                    maxiter=10 * n, v0=np.ones(n) / np.sqrt(n))
        except spla.ArpackNoConvergence as exc:
            if len(exc.eigenvalues):
                res = eigen_residuals(L, exc.eigenvalues, exc.eigenvectors).max()
            else:
                res = float("inf")
            raise EigensolverError("Lanczos did not converge", res) from exc
        order = np.argsort(vals, kind="stable")
        vals, vecs = vals[order], vecs[:, order]
        res = eigen_residuals(L, vals, vecs).max()
        scale = max(1.0, spla.norm(L) if sp.issparse(L) else np.linalg.norm(L))
        if res > ITERATIVE_TOL * scale * 1e2:
            raise EigensolverError("Lanczos residual above tolerance", res)
    return SpectralEmbedding(vals, canonicalize_signs(vecs), kind)


def spectral_embedding(g, k=None, kind=NORMALIZED):
    """Smallest ``k`` (default: all) eigenpairs of the graph Laplacian."""
    k = g.num_nodes if k is None else min(k, g.num_nodes)
    L = dense_laplacian(g, kind) if g.num_nodes <= DENSE_LIMIT else laplacian(g, kind)
    return smallest_k_eigs(L, k, kind)


def pad_columns(x, width):
    """Zero-pad or truncate ``x`` to exactly ``width`` columns."""
    out = np.zeros((x.shape[0], width))
    w = min(width, x.shape[1])
    out[:, :w] = x[:, :w]
    return out


def positional_embedding(g, dim, kind=NORMALIZED, return_eigenvalues=False):
    """First ``dim`` eigenvectors of the normalized Laplacian as node features.

    The trivial (zero-eigenvalue) column is kept. Graphs with fewer than
    ``dim`` nodes get zero columns on the right.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    emb = spectral_embedding(g, min(dim, g.num_nodes), kind)
    feats = pad_columns(emb.eigenvectors, dim)
    if return_eigenvalues:
        return feats, emb.eigenvalues
    return feats


def path_closed_form(n, k):
    """Analytic ``k``-th eigenpair of the unnormalized Laplacian of ``P_n``."""
    if not 0 <= k < n:
        raise IndexError(f"k={k} must lie in [0, {n})")
    u = np.arange(1, n + 1)
    vec = np.cos(np.pi * k * u / n - np.pi * k / (2 * n))
    return 2.0 - 2.0 * np.cos(np.pi * k / n), vec / np.linalg.norm(vec)


def product_spectrum(a_eigs, b_eigs):
    """Sorted pairwise sums: the Laplacian spectrum of a Cartesian product."""
    return np.sort(np.add.outer(np.asarray(a_eigs), np.asarray(b_eigs)).ravel())


def second_eigenvalue(g, kind=NORMALIZED):
    """``lambda_2`` of the Laplacian (0 for graphs with fewer than two nodes)."""
    if g.num_nodes < 2:
        return 0.0
    return float(np.linalg.eigvalsh(dense_laplacian(g, kind))[1])
