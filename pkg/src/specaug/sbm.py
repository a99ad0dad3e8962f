"""Two-block stochastic block models and numerical checks of their spectral theory."""
import math
from dataclasses import dataclass, field

import numpy as np

from specaug.graph import from_dense, num_components
from specaug.spectral import NORMALIZED, canonicalize_signs, dense_laplacian, second_eigenvalue


class InvariantViolation(ArithmeticError):
    """A computed quantity broke a sign or ordering guarantee."""


@dataclass(frozen=True)
class SbmSpec:
    """``2N`` nodes; ``p`` inside block 0, ``q`` inside block 1, ``z`` across.

    Requires ``0 < z < q <= p <= 1`` and ``p q > z^2``. Equal ``p`` and ``q``
    is allowed so symmetric models can be built.
    """

    N: int
    p: float
    q: float
    z: float
    self_loops: bool = True

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if not 0.0 < self.z < self.q <= self.p <= 1.0:
            raise ValueError(f"need 0 < z < q <= p <= 1, got p={self.p}, q={self.q}, z={self.z}")
        if not self.p * self.q > self.z ** 2:
            raise ValueError("need p * q > z^2")

    @property
    def num_nodes(self):
        return 2 * self.N

    def labels(self):
        return np.repeat([0, 1], self.N)


def expectation_matrix(spec):
    """Exact ``E[A]`` including the diagonal (zero diagonal without self-loops)."""
    B = np.array([[spec.p, spec.z], [spec.z, spec.q]])
    lab = spec.labels()
    E = B[lab][:, lab]
    if not spec.self_loops:
        np.fill_diagonal(E, 0.0)
    return E


def sample_sbm(spec, rng_seed=None):
    """Bernoulli draw of every unordered pair (and diagonal when loops are on)."""
    rng = np.random.default_rng(rng_seed)
    n = spec.num_nodes
    u = rng.random((n, n))
    k = 0 if spec.self_loops else 1
    upper = np.triu(u < expectation_matrix(spec), k=k)
    adj = upper | upper.T
    return from_dense(adj), spec.labels()


@dataclass(frozen=True)
class BlockSpectrum:
    c_plus: float
    c_minus: float
    mu1: float
    mu2: float


def block_eigenpairs(p, q, z):
    """Roots of ``z c^2 + (p - q) c - z = 0`` and the eigenvalues ``p + z c``.

    ``(1, c)`` is an eigenvector of ``[[p, z], [z, q]]`` for either root.
    """
    if z == 0:
        raise ValueError("z = 0 makes the quadratic degenerate")
    disc = math.sqrt((p - q) ** 2 + 4.0 * z * z)
    c_plus = ((q - p) + disc) / (2.0 * z)
    c_minus = ((q - p) - disc) / (2.0 * z)
    # cancellation-free form for the root whose numerator terms cancel
    if q - p < 0:
        c_plus = -1.0 / c_minus
    else:
        c_minus = -1.0 / c_plus
    return BlockSpectrum(c_plus, c_minus, p + z * c_plus, p + z * c_minus)


def line_transformed_params(p, q, z):
    """Entries of the log-transformed first-order matrix on the block expectation.

    Returns ``(p', q', z')`` with ``p' = log p - 2 log(p + z) + log(p + q + 2z)``
    and the analogous forms, then checks ``p' > 0``, ``z' < 0`` and
    ``p' < q'`` (``p' = q'`` when ``p = q``).
    """
    SbmSpec(1, p, q, z)
    total = math.log(p + q + 2.0 * z)
    pp = math.log(p) - 2.0 * math.log(p + z) + total
    qq = math.log(q) - 2.0 * math.log(q + z) + total
    zz = math.log(z) - math.log(p + z) - math.log(q + z) + total
    if not pp > 0.0:
        raise InvariantViolation(f"p' = {pp} is not positive")
    if not zz < 0.0:
        raise InvariantViolation(f"z' = {zz} is not negative")
    if (p > q and not pp < qq) or (p == q and pp != qq):
        raise InvariantViolation(f"p' = {pp} and q' = {qq} are out of order")
    return pp, qq, zz


def operator_norm(H, tol=1e-6, max_iter=10000):
    """Largest singular value of symmetric ``H`` by power iteration on ``H^2``."""
    H = np.asarray(H, dtype=np.float64)
    n = H.shape[0]
    if n == 0 or not np.any(H):
        return 0.0
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = H @ (H @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = math.sqrt(norm)
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


@dataclass(frozen=True)
class DavisKahanResult:
    sin_theta: float
    theta: float
    op_norm: float
    eigengap: float
    bound: float
    scaled_bound: float
    bound_satisfied: bool
    scaled_satisfied: bool


def davis_kahan_check(A_true, A_observed, i, block_size=None):
    """Angle between the ``i``-th eigenvectors (1-based, by descending eigenvalue).

    ``bound`` is the classical ``sin(theta) <= 2 ||H|| / gap`` where ``gap``
    separates eigenvalue ``i`` of ``A_true`` from the rest of its spectrum.
    ``scaled_bound`` is ``2 ||H|| / (N gap)`` compared against
    ``sin(2 theta)``, with ``N = block_size`` (default half the row count).
    """
    A = np.asarray(A_true, dtype=np.float64)
    B = np.asarray(A_observed, dtype=np.float64)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("matrices must be square and of equal size")
    if not (np.allclose(A, A.T) and np.allclose(B, B.T)):
        raise ValueError("matrices must be symmetric")
    n = A.shape[0]
    if not 1 <= i <= n:
        raise IndexError(f"eigen-index {i} outside [1, {n}]")
    N = n / 2.0 if block_size is None else block_size
    va, ua = np.linalg.eigh(A)
    vb, ub = np.linalg.eigh(B)
    ua = canonicalize_signs(ua[:, ::-1])
    ub = canonicalize_signs(ub[:, ::-1])
    va = va[::-1]
    others = np.delete(va, i - 1)
    gap = float(np.min(np.abs(others - va[i - 1]))) if len(others) else math.inf
    u, v = ua[:, i - 1], ub[:, i - 1]
    if u @ v < 0:
        v = -v
    # acos loses half the digits near cos = 1; this form does not
    theta = 2.0 * math.atan2(np.linalg.norm(u - v), np.linalg.norm(u + v))
    sin_theta = math.sin(theta)
    h = operator_norm(B - A)
    if gap == 0.0:
        nan = float("nan")
        return DavisKahanResult(sin_theta, theta, h, 0.0, nan, nan, False, False)
    bound = 2.0 * h / gap
    scaled = 2.0 * h / (N * gap)
    return DavisKahanResult(sin_theta, theta, h, gap, bound, scaled,
                            sin_theta <= bound + 1e-12, math.sin(2 * theta) <= scaled + 1e-12)


def concentration_envelope(p, N):
    """``sqrt(18 p N)``: the operator-norm envelope for ``||A - E[A]||``."""
    return math.sqrt(18.0 * p * N)


@dataclass
class FidelityReport:
    match_fraction: float
    ego_match_fraction: float
    ties: int
    ego_ties: int
    epsilon: float
    seed_used: int
    retries: int
    centers: np.ndarray = field(repr=False, default=None)
    crop_sizes: np.ndarray = field(repr=False, default=None)


def _majority(labels):
    counts = np.bincount(labels, minlength=2)
    if counts[0] == counts[1]:
        return None
    return int(np.argmax(counts))


def spectral_coordinates(g, kind=NORMALIZED):
    """``(x, y)`` per node: the ``lambda_2`` / ``lambda_3`` eigenvectors of the
    normalized Laplacian, or the top two adjacency eigenvectors."""
    if kind == "adjacency":
        vals, vecs = np.linalg.eigh(g.adjacency().toarray())
        vecs = canonicalize_signs(vecs[:, ::-1][:, :2])
        return vecs
    vals, vecs = np.linalg.eigh(dense_laplacian(g, kind))
    return canonicalize_signs(vecs[:, 1:3])


def centroid_epsilon(coords, labels):
    """Half the distance between the two label centroids."""
    c0 = coords[labels == 0].mean(axis=0)
    c1 = coords[labels == 1].mean(axis=0)
    return 0.5 * float(np.linalg.norm(c0 - c1))


def crop_fidelity_experiment(spec, epsilon=None, num_centers=50, rng_seed=0, kind=NORMALIZED,
                             max_retries=10):
    """Does the spectral neighbourhood of a node share the node's block label?

    For each sampled centre ``v`` the set ``{v' : ||coords(v') - coords(v)|| <= eps}``
    and the closed 1-hop neighbourhood vote by majority; ties count as
    misses. ``epsilon=None`` uses half the centroid distance. Disconnected
    samples are redrawn with the next seed, at most ``max_retries`` times.
    """
    seq = rng_seed if isinstance(rng_seed, np.random.SeedSequence) \
        else np.random.SeedSequence(rng_seed)
    for attempt in range(max_retries + 1):
        child = seq.spawn(1)[0]
        g, labels = sample_sbm(spec, child)
        if num_components(g) == 1:
            break
    else:
        raise RuntimeError(f"no connected sample in {max_retries + 1} draws")
    coords = spectral_coordinates(g, kind)
    eps = centroid_epsilon(coords, labels) if epsilon is None else float(epsilon)
    rng = np.random.default_rng(child.spawn(1)[0])
    n = g.num_nodes
    centers = np.sort(rng.choice(n, size=min(num_centers, n), replace=False))
    hits = ego_hits = ties = ego_ties = 0
    sizes = []
    for v in centers:
        dist = np.linalg.norm(coords - coords[v], axis=1)
        members = np.flatnonzero(dist <= eps * (1 + 1e-12) + 1e-15) if math.isfinite(eps) \
            else np.arange(n)
        sizes.append(len(members))
        maj = _majority(labels[members])
        ties += maj is None
        hits += maj == labels[v]
        ego = np.union1d(g.neighbors(v), [v])
        maj = _majority(labels[ego])
        ego_ties += maj is None
        ego_hits += maj == labels[v]
    k = len(centers)
    return FidelityReport(hits / k, ego_hits / k, ties, ego_ties, eps, attempt, attempt,
                          centers, np.array(sizes))


@dataclass(frozen=True)
class QuintileReport:
    means: np.ndarray
    counts: np.ndarray
    lambda2_ranges: list
    order: np.ndarray


def quintile_report(graphs, scores, kind=NORMALIZED):
    """Mean score per ``lambda_2`` rank quintile (ties keep input order)."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(graphs) < 5:
        raise ValueError("need at least five graphs")
    if len(scores) != len(graphs):
        raise ValueError("one score per graph is required")
    lam = np.array([second_eigenvalue(g, kind) for g in graphs])
    order = np.argsort(lam, kind="stable")
    groups = np.array_split(order, 5)
    means = np.array([scores[idx].mean() for idx in groups])
    counts = np.array([len(idx) for idx in groups])
    ranges = [(float(lam[idx].min()), float(lam[idx].max())) for idx in groups]
    return QuintileReport(means, counts, ranges, order)
