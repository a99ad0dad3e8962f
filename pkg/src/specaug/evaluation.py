"""Frozen-encoder evaluation: representations, logistic regression, k-fold, HITS@10."""
from dataclasses import dataclass

import numpy as np

from specaug.augment import make_view
from specaug.encoder import encode_views
from specaug.graph import ego_network

TASKS = ("graph", "node")
METRICS = ("accuracy", "macro_f1")
DEFAULT_EGO_RADIUS = 2


@dataclass(eq=False)
class Dataset:
    """Labelled instances: graphs, or ``(graph, center)`` pairs for node tasks."""

    instances: list
    labels: np.ndarray
    task: str = "graph"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if len(self.instances) != len(self.labels):
            raise ValueError("one label per instance is required")
        if len(self.labels) and self.labels.min() < 0:
            raise ValueError("labels must be non-negative")
        if self.task == "node" and not all(isinstance(x, tuple) and len(x) == 2
                                           for x in self.instances):
            raise ValueError("node tasks need (graph, center) instances")

    @property
    def num_classes(self):
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def instance_view(instance, task, dim, radius=DEFAULT_EGO_RADIUS):
    """The deterministic (augmentation-free) view of one instance."""
    if task == "node":
        g, center = instance
        sub, nodes = ego_network(g, center, radius)
        return make_view(sub, nodes, dim)
    return make_view(instance, np.arange(instance.num_nodes), dim)


def extract_representations(params, dataset, radius=DEFAULT_EGO_RADIUS, batch_size=256):
    """One representation row per instance, in instance order."""
    rows = []
    for start in range(0, len(dataset.instances), batch_size):
        chunk = dataset.instances[start:start + batch_size]
        views = [instance_view(x, dataset.task, params.pos_dim, radius) for x in chunk]
        rows.append(encode_views(params, views))
    if not rows:
        return np.zeros((0, params.hidden_dim))
    return np.vstack(rows)


# ---------------------------------------------------------------- classifier

@dataclass(eq=False)
class LogisticModel:
    W: np.ndarray
    b: np.ndarray
    classes: np.ndarray
    iterations: int
    grad_norm: float
    loss: float

    def decision(self, X):
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict_proba(self, X):
        return _softmax(self.decision(X))

    def predict(self, X):
        return self.classes[np.argmax(self.decision(X), axis=1)]


def _softmax(Z):
    E = np.exp(Z - Z.max(axis=1, keepdims=True))
    return E / E.sum(axis=1, keepdims=True)


def _objective(W, b, X, Y, l2):
    Z = X @ W + b
    top = Z.max(axis=1, keepdims=True)
    E = np.exp(Z - top)
    total = E.sum(axis=1, keepdims=True)
    n = len(X)
    loss = (np.sum(top + np.log(total)) - np.sum(Z * Y)) / n + 0.5 * l2 * np.sum(W * W)
    G = (E / total - Y) / n
    return loss, X.T @ G + l2 * W, G.sum(axis=0)


def fit_logreg(X, y, l2=1e-4, max_iter=5000, tol=1e-6):
    """Multinomial logistic regression by full-batch gradient descent.

    Starts from zero and steps with ``1 / L`` where ``L`` bounds the
    gradient's Lipschitz constant, so the objective never increases.
    Stops when the gradient norm drops below ``tol`` or after ``max_iter``
    iterations.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes, yi = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("training labels contain a single class")
    n, d = X.shape
    Y = np.zeros((n, len(classes)))
    Y[np.arange(n), yi] = 1.0
    W = np.zeros((d, len(classes)))
    b = np.zeros(len(classes))
    # softmax-CE Hessian is bounded by 1/2 times the augmented Gram matrix
    Xa = np.hstack([X, np.ones((n, 1))])
    lip = 0.5 * np.linalg.norm(Xa, 2) ** 2 / n + l2
    step = 1.0 / lip
    loss, gW, gb = _objective(W, b, X, Y, l2)
    it = 0
    gnorm = float(np.sqrt(np.sum(gW ** 2) + np.sum(gb ** 2)))
    while it < max_iter and gnorm >= tol:
        W = W - step * gW
        b = b - step * gb
        loss, gW, gb = _objective(W, b, X, Y, l2)
        gnorm = float(np.sqrt(np.sum(gW ** 2) + np.sum(gb ** 2)))
        it += 1
    return LogisticModel(W, b, classes, it, gnorm, float(loss))


def logreg_fit_predict(X_train, y_train, X_test, l2=1e-4, max_iter=5000, tol=1e-6):
    return fit_logreg(X_train, y_train, l2, max_iter, tol).predict(X_test)


# ---------------------------------------------------------------- metrics

def accuracy(y_true, y_pred):
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    return 100.0 * float(np.mean(y_true == y_pred)) if len(y_true) else 0.0


def macro_f1(y_true, y_pred):
    """Unweighted mean of per-class F1 over the classes present in either array."""
    y_true, y_pred = np.asarray(y_true), np.asarray(y_pred)
    scores = []
    for c in np.union1d(y_true, y_pred):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return 100.0 * float(np.mean(scores)) if scores else 0.0


_METRIC_FUNCS = {"accuracy": accuracy, "macro_f1": macro_f1}


def stratified_folds(X, y, k, rng_seed=0):
    """Fold index per instance, independent of the instance order.

    Instances are put in a canonical order (by class, then lexicographically
    by feature row), shuffled within each class by the seed, and dealt
    round-robin to the ``k`` folds.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if k < 2:
        raise ValueError("k must be at least 2")
    if counts.min() < k:
        raise ValueError(f"class with {counts.min()} instances cannot be split into {k} folds")
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    canonical = np.lexsort(keys)
    rng = np.random.default_rng(rng_seed)
    folds = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in classes:
        members = canonical[y[canonical] == c]
        members = members[rng.permutation(len(members))]
        folds[members] = (np.arange(len(members)) + offset) % k
        offset += len(members)
    return folds


@dataclass(frozen=True)
class KFoldResult:
    mean: float
    std: float
    folds: tuple
    metric: str

    def as_record(self, task="graph"):
        return {"task": task, "metric": self.metric, "mean": self.mean, "std": self.std,
                "folds": list(self.folds)}


def kfold_score(X, y, k=10, metric="accuracy", rng_seed=0, l2=1e-4, max_iter=5000):
    """Stratified ``k``-fold score of logistic regression (out of 100)."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    folds = stratified_folds(X, y, k, rng_seed)
    keys = [X[:, j] for j in range(X.shape[1] - 1, -1, -1)] + [y]
    canonical = np.lexsort(keys)
    scores = []
    for f in range(k):
        train = canonical[folds[canonical] != f]
        test = canonical[folds[canonical] == f]
        pred = logreg_fit_predict(X[train], y[train], X[test], l2, max_iter)
        scores.append(_METRIC_FUNCS[metric](y[test], pred))
    scores = np.array(scores)
    return KFoldResult(float(scores.mean()), float(scores.std()), tuple(scores.tolist()), metric)


def hits_at_k(reprs_a, reprs_b, pairs, k=20, top=10):
    """Fraction of ``(a, b)`` pairs whose ``b`` ranks in the top ``top`` for ``a``.

    Candidates are all rows of ``reprs_b`` ranked by inner product with row
    ``a`` of ``reprs_a``; only the best ``k`` form the pool, and a hit
    needs ``b`` within the first ``top`` of that pool. Ties rank by row index.
    """
    A = np.asarray(reprs_a, dtype=np.float64)
    B = np.asarray(reprs_b, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return 0.0
    cutoff = min(k, top, B.shape[0])
    hits = 0
    for a, b in pairs:
        scores = B @ A[a]
        ranking = np.argsort(-scores, kind="stable")
        pool = ranking[:min(k, len(ranking))]
        hits += b in pool[:cutoff]
    return hits / len(pairs)
