"""Instance-discrimination loss, Adam, and the E2E / MoCo training loops."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from specaug.augment import AugmentationConfig, generate_view_pair
from specaug.encoder import (DEFAULT_DEGREE_BUCKETS, DEFAULT_HIDDEN, DEFAULT_LAYERS,
                             backward_batch, batch_views, encode_views, forward_batch,
                             init_params)
from specaug.global_embed import DENSE_CAP, embed_graph

SCHEMES = ("e2e", "moco")


@dataclass
class TrainConfig:
    scheme: str = "e2e"
    steps: int = 75000
    lr: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup_frac: float = 0.1
    decay_frac: float = 0.1
    batch_size: int = 1024
    temperature: float = 0.07
    queue_size: int = 1023
    momentum: float = 0.999
    dropout: float = 0.5
    hidden_dim: int = DEFAULT_HIDDEN
    num_layers: int = DEFAULT_LAYERS
    degree_buckets: int = DEFAULT_DEGREE_BUCKETS
    report_linear_loss: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError("momentum must lie in [0, 1]")
        if self.queue_size < 1 or self.batch_size < 1 or self.steps < 0:
            raise ValueError("queue_size and batch_size must be positive, steps non-negative")
        if not 0.0 <= self.warmup_frac + self.decay_frac <= 1.0:
            raise ValueError("warmup and decay fractions must fit in the schedule")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @classmethod
    def full_scale(cls, scheme="e2e", **overrides):
        """Large-corpus defaults: E2E batch 1024 / K 1023, MoCo batch 32 / K 16384."""
        if scheme == "moco":
            base = dict(scheme="moco", batch_size=32, queue_size=16384)
        else:
            base = dict(scheme="e2e", batch_size=1024, queue_size=1023)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def desk(cls, scheme="e2e", **overrides):
        """Small preset for a laptop: batch 32, dictionary 255, 1000 steps."""
        base = dict(scheme=scheme, batch_size=32, queue_size=255, steps=1000)
        base.update(overrides)
        return cls(**base)


# ---------------------------------------------------------------- loss

def info_nce_loss(query, positive, negatives, tau=0.07, linear_denominator=False):
    """Loss of one query against its positive and a list of negatives.

    ``linear_denominator=True`` drops the exponential from the denominator terms,
    ``-log(exp(s+) / (s+ + sum s-))`` with ``s = <q, k> / tau``. That form is
    only defined while the denominator is positive.
    """
    q = np.asarray(query, dtype=np.float64)
    kp = np.asarray(positive, dtype=np.float64)
    kn = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if kn.size == 0:
        raise ValueError("at least one negative is required")
    if kn.shape[1] != q.shape[0] or kp.shape != q.shape:
        raise ValueError("query, positive and negatives must share a dimension")
    if not (np.isfinite(q).all() and np.isfinite(kp).all() and np.isfinite(kn).all()):
        raise ValueError("representations must be finite")
    pos = float(q @ kp) / tau
    neg = kn @ q / tau
    if linear_denominator:
        denom = pos + neg.sum()
        if denom <= 0.0:
            raise ValueError("denominator is not positive; this form is undefined here")
        return float(np.log(denom) - pos)
    logits = np.concatenate([[pos], neg])
    top = logits.max()
    return float(top + np.log(np.exp(logits - top).sum()) - pos)


def batch_negative_mask(batch_size, max_negatives):
    """``allowed[i, j]``: key ``j`` enters row ``i``'s denominator.

    Row ``i`` keeps its positive (``j = i``) and the next ``max_negatives``
    instances cyclically, i.e. ``i + 1, i + 2, ...``.
    """
    m = min(batch_size - 1, max_negatives)
    allowed = np.eye(batch_size, dtype=bool)
    rows = np.arange(batch_size)
    for o in range(1, m + 1):
        allowed[rows, (rows + o) % batch_size] = True
    return allowed


def in_batch_loss(Q, K, tau, max_negatives):
    """Mean loss with in-batch negatives and its gradients wrt ``Q`` and ``K``."""
    B = Q.shape[0]
    if B < 2:
        raise ValueError("in-batch contrast needs at least two instances")
    logits = Q @ K.T / tau
    allowed = batch_negative_mask(B, max_negatives)
    z = np.where(allowed, logits, -np.inf)
    top = z.max(axis=1, keepdims=True)
    e = np.where(allowed, np.exp(z - top), 0.0)
    total = e.sum(axis=1, keepdims=True)
    probs = e / total
    loss = float(np.mean(top[:, 0] + np.log(total[:, 0]) - np.diag(logits)))
    dlogits = (probs - np.eye(B)) / B
    return loss, dlogits @ K / tau, dlogits.T @ Q / tau


def queue_loss(Q, K, negatives, tau):
    """Mean loss against a fixed negative bank; gradients wrt ``Q`` and ``K``."""
    B = Q.shape[0]
    pos = np.sum(Q * K, axis=1) / tau
    neg = Q @ negatives.T / tau
    logits = np.hstack([pos[:, None], neg])
    top = logits.max(axis=1, keepdims=True)
    e = np.exp(logits - top)
    total = e.sum(axis=1, keepdims=True)
    probs = e / total
    loss = float(np.mean(top[:, 0] + np.log(total[:, 0]) - pos))
    dpos = (probs[:, 0] - 1.0) / B
    dneg = probs[:, 1:] / B
    dQ = (dpos[:, None] * K + dneg @ negatives) / tau
    dK = dpos[:, None] * Q / tau
    return loss, dQ, dK


def linear_denominator_batch_loss(Q, K, tau):
    """Mean loss with a linear (exp-free) denominator; nan where undefined."""
    logits = Q @ K.T / tau
    pos = np.diag(logits)
    denom = logits.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(denom > 0, np.log(np.where(denom > 0, denom, 1.0)) - pos, np.nan)
    return float(np.mean(vals))


def loss_gradients(params, query_views, key_views, tau=0.07, negatives=None, max_negatives=None,
                   key_params=None, dropout=0.0, rng=None):
    """Mean batch loss and exact gradients for every array in ``params``.

    Without ``negatives`` each query contrasts with the other keys in the
    batch (at most ``max_negatives`` of them). With a ``negatives`` bank the
    bank is the denominator. Keys go through ``key_params`` without gradient
    when given, otherwise through ``params`` with gradient.
    Returns ``(loss, grads, Q, K)``.
    """
    B = len(query_views)
    if B != len(key_views) or B == 0:
        raise ValueError("need the same positive number of query and key views")
    if max_negatives is None:
        max_negatives = B - 1
    rng = np.random.default_rng(rng) if dropout else None
    if key_params is None:
        Y, cache = forward_batch(params, batch_views(list(query_views) + list(key_views), params),
                                 dropout, rng)
        Q, K = Y[:B], Y[B:]
    else:
        Q, cache = forward_batch(params, batch_views(query_views, params), dropout, rng)
        K, _ = forward_batch(key_params, batch_views(key_views, key_params))
    if negatives is None:
        loss, dQ, dK = in_batch_loss(Q, K, tau, max_negatives)
    else:
        loss, dQ, dK = queue_loss(Q, K, np.asarray(negatives, dtype=np.float64), tau)
    if not np.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    dY = np.vstack([dQ, dK]) if key_params is None else dQ
    grads = backward_batch(params, cache, dY)
    return loss, grads, Q, K


# ---------------------------------------------------------------- optimizer

def lr_at(step, total_steps, base_lr, warmup_frac=0.1, decay_frac=0.1):
    """Linear warm-up ``(step + 1) / warmup`` then constant then linear decay."""
    warm = int(round(warmup_frac * total_steps))
    decay = int(round(decay_frac * total_steps))
    if warm and step < warm:
        return base_lr * (step + 1) / warm
    if decay and step >= total_steps - decay:
        return base_lr * (total_steps - step) / decay
    return base_lr


@dataclass(eq=False)
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(arrays, grads, step, cfg, state, total_steps=None):
    """One bias-corrected Adam update; returns new arrays (inputs untouched)."""
    total = cfg.steps if total_steps is None else total_steps
    lr = lr_at(step, max(total, 1), cfg.lr, cfg.warmup_frac, cfg.decay_frac)
    t = step + 1
    out = {}
    for name, w in arrays.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {w.shape} for {name}")
        m = cfg.beta1 * state.m.get(name, 0.0) + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v.get(name, 0.0) + (1.0 - cfg.beta2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1.0 - cfg.beta1 ** t)
        v_hat = v / (1.0 - cfg.beta2 ** t)
        out[name] = w - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return out, lr


# ---------------------------------------------------------------- MoCo state

class KeyQueue:
    """Fixed-size FIFO of key representations stored as a ring buffer."""

    def __init__(self, size, dim, rng_seed=None):
        rng = np.random.default_rng(rng_seed)
        keys = rng.standard_normal((size, dim))
        self.keys = keys / np.linalg.norm(keys, axis=1, keepdims=True)
        self.cursor = 0

    @property
    def size(self):
        return self.keys.shape[0]

    def enqueue(self, batch):
        for row in np.atleast_2d(batch):
            self.keys[self.cursor] = row
            self.cursor = (self.cursor + 1) % self.size

    def ordered(self):
        """Entries from oldest to newest."""
        return np.roll(self.keys, -self.cursor, axis=0)


@dataclass(eq=False)
class MoCoState:
    key_params: object
    queue: KeyQueue


def momentum_update(key_params, params, m):
    """``theta' <- m theta' + (1 - m) theta`` in place."""
    for name, w in params.arrays.items():
        key_params.arrays[name] = m * key_params.arrays[name] + (1.0 - m) * w


# ---------------------------------------------------------------- training

@dataclass(eq=False)
class TrainState:
    params: object
    adam: AdamState
    step: int
    moco: MoCoState = None
    corpus: list = None
    global_embeddings: list = None
    aug: AugmentationConfig = None
    dropout_rng: object = None


def _global_embeddings(corpus, aug):
    if aug.p_align <= 0.0 and (aug.p_filter <= 0.0 or aug.filter_mode == "off"):
        return [None] * len(corpus)
    return [embed_graph(g, aug.embed_dim) if 2 <= g.num_nodes <= DENSE_CAP else None
            for g in corpus]


def init_state(corpus, cfg, aug, rng_seed):
    seeds = np.random.SeedSequence(rng_seed).spawn(3)
    params = init_params(hidden_dim=cfg.hidden_dim, rng_seed=seeds[0],
                         num_layers=cfg.num_layers, pos_dim=aug.embed_dim,
                         degree_buckets=cfg.degree_buckets)
    moco = None
    if cfg.scheme == "moco":
        moco = MoCoState(params.copy(), KeyQueue(cfg.queue_size, cfg.hidden_dim, seeds[1]))
    return TrainState(params, AdamState(), 0, moco, list(corpus),
                      _global_embeddings(corpus, aug), aug, np.random.default_rng(seeds[2]))


def update_on_views(state, query_views, key_views, cfg):
    """One optimizer step on prepared view pairs; returns ``(loss, lr)``."""
    params = state.params
    if cfg.scheme == "e2e":
        loss, grads, Q, K = loss_gradients(params, query_views, key_views, cfg.temperature,
                                           max_negatives=cfg.queue_size, dropout=cfg.dropout,
                                           rng=state.dropout_rng)
    else:
        loss, grads, Q, K = loss_gradients(params, query_views, key_views, cfg.temperature,
                                           negatives=state.moco.queue.keys,
                                           key_params=state.moco.key_params,
                                           dropout=cfg.dropout, rng=state.dropout_rng)
    new_arrays, lr = adam_step(params.arrays, grads, state.step, cfg, state.adam)
    params.arrays = new_arrays
    if cfg.scheme == "moco":
        state.moco.queue.enqueue(K)
        momentum_update(state.moco.key_params, params, cfg.momentum)
    state.step += 1
    record = {"step": state.step - 1, "loss": loss, "lr": lr, "scheme": cfg.scheme}
    if cfg.report_linear_loss:
        record["linear_loss"] = linear_denominator_batch_loss(Q, K, cfg.temperature)
    return record


_WORKER = {}


def _worker_init(corpus, globs, aug):
    _WORKER.update(corpus=corpus, globs=globs, aug=aug)


def _worker_pair(job):
    gi, center, seed = job
    return generate_view_pair(_WORKER["corpus"][gi], center, _WORKER["aug"],
                              _WORKER["globs"][gi], seed)


def make_pairs(state, jobs, pool=None):
    """View pairs for ``(graph_index, center, seed)`` jobs, in job order."""
    if pool is not None:
        return list(pool.map(_worker_pair, jobs, chunksize=max(1, len(jobs) // 8)))
    return [generate_view_pair(state.corpus[gi], c, state.aug, state.global_embeddings[gi], s)
            for gi, c, s in jobs]


def prefill_queue(state, cfg, rng_seed, pool=None):
    """Fill the MoCo queue with real keys from the key encoder.

    Keys come from views around uniformly drawn centres, so the first steps
    contrast against genuine negatives instead of random unit vectors.
    """
    rng = np.random.default_rng(rng_seed)
    queue = state.moco.queue
    remaining = queue.size
    while remaining > 0:
        n = min(cfg.batch_size, remaining)
        jobs = [(gi, c, int(rng.integers(2 ** 63))) for gi, c in sample_centers(rng, state.corpus, n)]
        keys = encode_views(state.moco.key_params, [p[1] for p in make_pairs(state, jobs, pool)])
        queue.enqueue(keys)
        remaining -= n


def train_step(state, centers, cfg, rng_seed, pool=None):
    """Generate views around ``(graph_index, center)`` pairs and take one step."""
    rng = np.random.default_rng(rng_seed)
    jobs = [(int(gi), int(c), int(rng.integers(2 ** 63))) for gi, c in centers]
    pairs = make_pairs(state, jobs, pool)
    record = update_on_views(state, [p[0] for p in pairs], [p[1] for p in pairs], cfg)
    return state, record["loss"]


def sample_centers(rng, corpus, batch_size):
    out = []
    for _ in range(batch_size):
        gi = int(rng.integers(len(corpus)))
        out.append((gi, int(rng.integers(corpus[gi].num_nodes))))
    return out


@dataclass(eq=False)
class PretrainResult:
    params: object
    records: list
    state: TrainState


def pretrain(corpus, cfg, aug=None, rng_seed=0, workers=1, callback=None):
    """Run ``cfg.steps`` training steps; deterministic given the seed.

    Every batch element draws a graph and then a centre uniformly. Each
    step's record ``{step, loss, lr, scheme}`` is appended to the result
    and passed to ``callback`` if given. ``workers > 1`` generates views in
    a process pool; the results do not depend on the worker count.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if any(g.num_nodes == 0 for g in corpus):
        raise ValueError("corpus graphs must have at least one node")
    aug = aug or AugmentationConfig()
    state = init_state(corpus, cfg, aug, rng_seed)
    seeds = np.random.SeedSequence(rng_seed).spawn(5)
    sampler = np.random.default_rng(seeds[3])
    records = []
    pool = None
    if workers > 1 and cfg.steps > 0:
        pool = ProcessPoolExecutor(workers, initializer=_worker_init,
                                   initargs=(state.corpus, state.global_embeddings, aug))
    try:
        if cfg.scheme == "moco" and cfg.steps > 0:
            prefill_queue(state, cfg, seeds[4], pool)
        for _ in range(cfg.steps):
            centers = sample_centers(sampler, corpus, cfg.batch_size)
            jobs = [(gi, c, int(sampler.integers(2 ** 63))) for gi, c in centers]
            pairs = make_pairs(state, jobs, pool)
            record = update_on_views(state, [p[0] for p in pairs], [p[1] for p in pairs], cfg)
            records.append(record)
            if callback is not None:
                callback(record)
    finally:
        if pool is not None:
            pool.shutdown()
    return PretrainResult(state.params, records, state)


def config_dict(cfg):
    return asdict(cfg)
