"""Embedding training.

``train_verse`` learns node vectors with noise-contrastive estimation over
sampled similarity pairs: a uniform source node, one positive draw from its
similarity distribution and ``negatives`` uniform noise nodes, each pair
followed by a logistic SGD step.  Workers update the shared matrix without
locks; with one worker the run is bit-reproducible for a fixed seed.

``train_fverse`` is the exhaustive variant: it precomputes exact similarity
rows and follows the gradient of the softmax cross-entropy against each row.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CapExceededError, ConfigError
from .graph import Graph
from .similarity import EXACT_NODE_CAP, Order, SimilaritySpec, _draw, _uniform, exact_rows, kernel_args

log = logging.getLogger(__name__)

LOGIT_CLAMP = 30.0


@dataclass
class EmbeddingModel:
    w: np.ndarray
    w_context: np.ndarray | None = None
    loss_history: list = field(default_factory=list, repr=False)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def d(self) -> int:
        return self.w.shape[1]

    @property
    def order(self) -> Order:
        return Order.FIRST if self.w_context is None else Order.SECOND

    @property
    def targets(self) -> np.ndarray:
        """Matrix on the right-hand side of the model's dot products."""
        return self.w if self.w_context is None else self.w_context

    def embedding(self, concat_context: bool = False) -> np.ndarray:
        if concat_context and self.w_context is not None:
            return np.hstack([self.w, self.w_context])
        return self.w

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.w).all() and (self.w_context is None or np.isfinite(self.w_context).all()))

    def scores(self, rows=None) -> np.ndarray:
        """Unnormalized log-similarities ``W_u . B_v`` for the given source rows."""
        src = self.w if rows is None else self.w[rows]
        return src.astype(np.float64) @ self.targets.astype(np.float64).T


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    negatives: int = 3
    epochs: int = 100
    lr0: float = 0.0025
    lr_floor: float = 1e-4
    threads: int = 1
    seed: int = 0
    freeze_targets: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be at least 1")
        if self.negatives < 1:
            raise ConfigError("negatives must be at least 1")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if not self.lr0 > 0:
            raise ConfigError("lr0 must be positive")
        if self.lr_floor < 0:
            raise ConfigError("lr_floor must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    def learning_rate(self, progress: float) -> float:
        """Linear decay from ``lr0`` to ``lr_floor`` over training progress in [0, 1]."""
        floor = min(self.lr_floor, self.lr0)
        return self.lr0 - (self.lr0 - floor) * progress
# Large step budgets behind the --paper-scale preset, counted in epochs of n source draws (sampled)

# Paper-scale step budgets, read as one epoch per source-node draw (sampled)
# or per full pass over the rows (exhaustive).
PAPER_SCALE_EPOCHS = {"verse": 100_000, "fverse": 250}


def init_model(n: int, dim: int, order=Order.FIRST, seed=None) -> EmbeddingModel:
    """Gaussian initialization with variance ``1 / dim``, float32, deterministic per seed."""
    if n < 1 or dim < 1:
        raise ConfigError("need at least one node and one dimension")
    rng = np.random.default_rng(seed)
    scale = np.float32(1.0 / math.sqrt(dim))
    w = rng.standard_normal((n, dim), dtype=np.float32) * scale
    context = None
    if Order(int(order)) == Order.SECOND:
        context = rng.standard_normal((n, dim), dtype=np.float32) * scale
    return EmbeddingModel(w, context)


@numba.njit(nogil=True, cache=True)
def _nce_step(a_mat, b_mat, u, v, label, lr):
    a = a_mat[u]
    b = b_mat[v]
    dot = 0.0
    for k in range(a.shape[0]):
        dot += a[k] * b[k]
    if dot > 30.0:
        dot = 30.0
    elif dot < -30.0:
        dot = -30.0
    g = (label - 1.0 / (1.0 + math.exp(-dot))) * lr
    for k in range(a.shape[0]):
        ak = a[k]
        bk = b[k]
        a[k] += g * bk
        b[k] += g * ak


def nce_update(model: EmbeddingModel, u: int, v: int, label: int, lr: float) -> None:
    """One logistic step on the pair (u, v) in place.

    ``g = (label - sigmoid(W_u . B_v)) * lr``, then ``W_u += g * B_v`` and
    ``B_v += g * W_u``, both from pre-update values.  ``B`` is ``W`` itself
    in first-order mode and the context matrix in second-order mode.
    """
    if not (0 <= u < model.n and 0 <= v < model.n):
        raise IndexError("node index out of range")
    _nce_step(model.w, model.targets, int(u), int(v), float(label), float(lr))


@numba.njit(nogil=True, cache=True)
def _verse_worker(kind, param, bound, offsets, targets, roffsets, rtargets,
                  w, b, iterations, negatives, lr0, lr_floor, rng):
    n = w.shape[0]
    for it in range(iterations):
        lr = lr0 - (lr0 - lr_floor) * (it / iterations)
        while True:
            u = _uniform(rng, n)
            v = _draw(kind, param, bound, offsets, targets, roffsets, rtargets, u, rng)
            if v >= 0:
                break
        _nce_step(w, b, u, v, 1.0, lr)
        for _ in range(negatives):
            _nce_step(w, b, u, _uniform(rng, n), 0.0, lr)


def _warn_if_diverged(model: EmbeddingModel, cfg: TrainConfig) -> None:
    if not model.is_finite():
        log.warning("training diverged (non-finite weights); lower the learning rate below %g", cfg.lr0)


def worker_streams(seed, threads: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence([int(seed), 1]).spawn(threads)
    return [np.random.default_rng(child) for child in children]


def train_verse(g: Graph, gr: Graph | None, spec: SimilaritySpec, cfg: TrainConfig,
                model: EmbeddingModel | None = None) -> EmbeddingModel:
    """Sampled NCE training for ``cfg.epochs * n`` source draws.

    With ``cfg.threads > 1`` the iterations are split across workers that
    update the same matrices without synchronization.
    """
    if spec.kind == "adj" and g.m == 0:
        raise ConfigError("adjacency similarity needs at least one edge")
    if model is None:
        model = init_model(g.n, cfg.dim, spec.order, cfg.seed)
    elif model.n != g.n:
        raise ConfigError(f"model has {model.n} rows, graph has {g.n} nodes")
    kind, param, bound, roff, rtgt = kernel_args(g, gr, spec)
    total = cfg.epochs * g.n
    floor = min(cfg.lr_floor, cfg.lr0)
    w, b = model.w, model.targets
    streams = worker_streams(cfg.seed, cfg.threads)
    shares = [total // cfg.threads + (i < total % cfg.threads) for i in range(cfg.threads)]

    def run(i):
        _verse_worker(kind, param, bound, g.offsets, g.targets, roff, rtgt,
                      w, b, shares[i], cfg.negatives, cfg.lr0, floor, streams[i])

    started = time.perf_counter()
    if cfg.threads == 1:
        run(0)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            list(pool.map(run, range(cfg.threads)))
    log.info("trained %d iterations on %d workers in %.2fs", total, cfg.threads,
             time.perf_counter() - started)
    _warn_if_diverged(model, cfg)
    return model


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax_rows(model: EmbeddingModel, rows=None) -> np.ndarray:
    """Embedded similarity distributions: softmax of ``W_u . B`` over all nodes."""
    return np.exp(_log_softmax(model.scores(rows)))


def kl_objective(model: EmbeddingModel, rows) -> float:
    """Mean KL divergence (nats) from target rows to the model's softmax rows.

    ``rows`` is a sequence of ``(node, distribution)`` pairs or a mapping.
    """
    pairs = list(rows.items()) if isinstance(rows, dict) else list(rows)
    if not pairs:
        raise ValueError("no rows given")
    nodes = np.array([u for u, _ in pairs], dtype=np.int64)
    target = np.vstack([np.asarray(p, dtype=np.float64) for _, p in pairs])
    log_q = _log_softmax(model.scores(nodes))
    support = target > 0
    if np.any(np.isneginf(log_q[support])):
        return math.inf
    terms = np.zeros_like(target)
    terms[support] = target[support] * (np.log(target[support]) - log_q[support])
    return float(terms.sum(axis=1).mean())


def fverse_row_update(model: EmbeddingModel, u: int, target: np.ndarray, lr: float,
                      freeze_targets: bool = False) -> None:
    """Cross-entropy gradient step for source ``u`` against a full target row.

    With ``p = softmax(W_u . B)`` and ``r = target - p``: ``W_u += lr * r B``
    and ``B_j += lr * r_j * W_u`` for every j, both from pre-update values.
    """
    b = model.targets
    a = model.w[u].astype(np.float64)
    logits = b.astype(np.float64) @ a
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()
    r = target - p
    delta_a = lr * (r @ b)
    if not freeze_targets:
        b += (lr * np.outer(r, a)).astype(b.dtype)
    model.w[u] += delta_a.astype(model.w.dtype)


def train_fverse(g: Graph, gr: Graph | None, spec: SimilaritySpec, cfg: TrainConfig,
                 rows: np.ndarray | None = None, model: EmbeddingModel | None = None,
                 record_loss: bool = False, cap: int = EXACT_NODE_CAP) -> EmbeddingModel:
    """Full-distribution gradient descent on precomputed exact similarity rows.

    Each epoch visits every source once in a shuffled order.  With
    ``record_loss`` the mean KL objective after every epoch is appended to
    ``model.loss_history``.
    """
    if g.n > cap:
        raise CapExceededError(f"exhaustive training needs n <= {cap}, graph has {g.n} nodes")
    if rows is None:
        rows = exact_rows(g, spec, gr=gr, cap=cap)
    if rows.shape != (g.n, g.n):
        raise ValueError("rows must be an n x n matrix")
    if model is None:
        model = init_model(g.n, cfg.dim, spec.order, cfg.seed)
    rng = worker_streams(cfg.seed, 1)[0]
    everything = list(enumerate(rows))
    if record_loss:
        model.loss_history.append(kl_objective(model, everything))
    steps = cfg.epochs * g.n
    done = 0
    for _ in range(cfg.epochs):
        for u in rng.permutation(g.n):
            lr = cfg.learning_rate(done / steps)
            fverse_row_update(model, int(u), rows[u], lr, cfg.freeze_targets)
            done += 1
        if record_loss:
            model.loss_history.append(kl_objective(model, everything))
    _warn_if_diverged(model, cfg)
    return model
