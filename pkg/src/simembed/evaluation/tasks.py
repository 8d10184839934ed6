"""Downstream evaluation protocols over a trained embedding."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InputError
from ..graph import Graph
from .classifiers import logistic_train, softmax_train
from .metrics import f1_scores, ndcg_from_scores
from .operators import EdgeOperator, pair_features

log = logging.getLogger(__name__)

KMEANS_MAX_ITER = 300


def as_matrix(model) -> np.ndarray:
    """Node-by-dimension matrix from an EmbeddingModel or an array."""
    if hasattr(model, "embedding"):
        return np.asarray(model.embedding(), dtype=np.float64)
    return np.asarray(model, dtype=np.float64)


def _score_rows(model, nodes) -> np.ndarray:
    if hasattr(model, "scores"):
        return model.scores(nodes)
    emb = as_matrix(model)
    return emb[nodes] @ emb.T


@dataclass
class LabeledNodes:
    labels: dict  # node index -> tuple of label ids, in file order

    def __post_init__(self):
        for node, labs in self.labels.items():
            if not labs:
                raise InputError(f"node {node} has no labels")

    @property
    def classes(self) -> list:
        return sorted({c for labs in self.labels.values() for c in labs})

    @property
    def label_count(self) -> int:
        return len(self.classes)

    @property
    def nodes(self) -> np.ndarray:
        return np.array(sorted(self.labels), dtype=np.int64)

    def primary(self, nodes) -> np.ndarray:
        """First listed label of each node (the multiclass reading)."""
        return np.array([self.labels[int(u)][0] for u in nodes])


def load_labels(path, g: Graph) -> LabeledNodes:
    """Parse ``NODE_TOKEN<TAB>label[,label...]`` lines; tokens resolve through the graph's vocabulary."""
    labels: dict[int, tuple[str, ...]] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read labels {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected NODE<TAB>labels")
            try:
                node = g.index_of(parts[0])
            except (KeyError, ValueError):
                raise InputError(f"{path}:{lineno}: unknown node {parts[0]!r}") from None
            labs = tuple(x.strip() for x in parts[1].split(",") if x.strip())
            if not labs:
                raise InputError(f"{path}:{lineno}: node without labels")
            labels[node] = labels.get(node, ()) + labs
    return LabeledNodes(labels)


# ---- link prediction -----------------------------------------------------------


def sample_non_edges(g: Graph, count: int, rng: np.random.Generator, exclude=None) -> np.ndarray:
    """``count`` distinct node pairs (u != v) absent from ``g`` in both directions and from ``exclude``."""
    n = g.n
    if count > n * (n - 1) - g.m:
        raise ConfigError("not enough non-edges to sample")
    blocked = set(g.edge_keys().tolist())
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=np.int64).reshape(-1, 2)
        blocked.update((exclude[:, 0] * n + exclude[:, 1]).tolist())
    out: list[tuple[int, int]] = []
    seen = set()
    while len(out) < count:
        u, v = rng.integers(0, n, size=2)
        u, v = int(u), int(v)
        key = u * n + v
        if u == v or key in seen or key in blocked or v * n + u in blocked:
            continue
        seen.add(key)
        out.append((u, v))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_pairs(pairs, train_fraction: float, rng: np.random.Generator):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    order = rng.permutation(len(pairs))
    cut = int(round(train_fraction * len(pairs)))
    return pairs[order[:cut]], pairs[order[cut:]]


def link_prediction_eval(model, train_pos, train_neg, test_pos, test_neg,
                         op: EdgeOperator = EdgeOperator.HADAMARD, seed=0) -> float:
    """Accuracy of a logistic classifier on edge features built with ``op``."""
    splits = [np.asarray(s, dtype=np.int64).reshape(-1, 2) for s in (train_pos, train_neg, test_pos, test_neg)]
    if any(len(s) == 0 for s in splits):
        raise ConfigError("every link-prediction split must be non-empty")
    emb = as_matrix(model)
    tr_pos, tr_neg, te_pos, te_neg = splits
    x_train = np.vstack([pair_features(op, emb, tr_pos), pair_features(op, emb, tr_neg)])
    y_train = np.concatenate([np.ones(len(tr_pos)), np.zeros(len(tr_neg))])
    x_test = np.vstack([pair_features(op, emb, te_pos), pair_features(op, emb, te_neg)])
    y_test = np.concatenate([np.ones(len(te_pos)), np.zeros(len(te_neg))])
    clf = logistic_train(x_train, y_train, seed=seed)
    return float(np.mean(clf.predict(x_test) == y_test))


# ---- node classification ---------------------------------------------------------


def classification_eval(model, labels: LabeledNodes, train_fraction: float,
                        mode: str = "multiclass", seed=0) -> tuple[float, float]:
    """(micro-F1, macro-F1) on a random train/test split of the labeled nodes.

    ``multiclass`` fits softmax regression on each node's first label.
    ``multilabel`` fits one-vs-rest logistic models and predicts every label
    whose probability exceeds 0.5.  Macro-F1 averages over classes seen in
    training; unseen classes are skipped with a warning.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError("train_fraction must lie strictly inside (0, 1)")
    if mode not in ("multiclass", "multilabel"):
        raise ConfigError(f"unknown classification mode {mode!r}")
    nodes = labels.nodes
    if nodes.size < 10:
        raise ConfigError("classification needs at least 10 labeled nodes")
    emb = as_matrix(model)
    if nodes.max() >= emb.shape[0]:
        raise ConfigError("labeled node outside the embedding")
    rng = np.random.default_rng(seed)
    order = rng.permutation(nodes)
    cut = min(max(1, int(round(train_fraction * nodes.size))), nodes.size - 1)
    train, test = order[:cut], order[cut:]
    if mode == "multiclass":
        y_train = labels.primary(train)
        y_test = labels.primary(test)
        seen = sorted(set(y_train.tolist()))
        if len(seen) == 1:
            pred = np.full(test.size, seen[0])
        else:
            pred = softmax_train(emb[train], y_train, seed=seed).predict(emb[test])
        truth_sets = [{c} for c in y_test.tolist()]
        pred_sets = [{c} for c in pred.tolist()]
        all_classes = set(labels.primary(nodes).tolist())
    else:
        seen = sorted({c for u in train for c in labels.labels[int(u)]})
        scores = np.zeros((test.size, len(seen)), dtype=bool)
        for j, c in enumerate(seen):
            y = np.array([c in labels.labels[int(u)] for u in train], dtype=np.float64)
            if y.min() == y.max():
                scores[:, j] = bool(y[0])
                continue
            clf = logistic_train(emb[train], y, seed=seed)
            scores[:, j] = clf.predict_proba(emb[test]) > 0.5
        truth_sets = [set(labels.labels[int(u)]) for u in test]
        pred_sets = [{seen[j] for j in np.flatnonzero(row)} for row in scores]
        all_classes = set(labels.classes)
    missing = all_classes - set(seen)
    if missing:
        log.warning("%d classes absent from the training split are skipped in macro-F1", len(missing))
    return f1_scores(truth_sets, pred_sets, seen)


# ---- clustering ----------------------------------------------------------------


def _sq_dist(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] - 2.0 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_fit(model, k: int, seed=0, max_iter: int = KMEANS_MAX_ITER):
    """Lloyd's algorithm from k-means++ seeding.

    Returns ``(assignment, centers, inertia)``.  An emptied cluster is
    re-seeded at the point farthest from its current center.
    """
    x = as_matrix(model)
    n = x.shape[0]
    if k < 1:
        raise ConfigError("k must be positive")
    if k > n:
        raise ConfigError(f"k={k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = _sq_dist(x, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        idx = rng.choice(n, p=closest / total) if total > 0 else rng.integers(n)
        centers[c] = x[idx]
        closest = np.minimum(closest, _sq_dist(x, centers[c : c + 1])[:, 0])
    assignment = np.full(n, -1)
    for _ in range(max_iter):
        dist = _sq_dist(x, centers)
        new = np.argmin(dist, axis=1)
        for c in np.setdiff1d(np.arange(k), new):
            far = int(np.argmax(dist[np.arange(n), new]))
            centers[c] = x[far]
            dist[:, c] = _sq_dist(x, centers[c : c + 1])[:, 0]
            new = np.argmin(dist, axis=1)
        if np.array_equal(new, assignment):
            break
        assignment = new
        for c in range(k):
            members = x[assignment == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    inertia = float(_sq_dist(x, centers)[np.arange(n), assignment].sum())
    return assignment, centers, inertia


def kmeans(model, k: int, seed=0) -> np.ndarray:
    return kmeans_fit(model, k, seed)[0]


# ---- reconstruction and ranking -----------------------------------------------------


def graph_reconstruction(model, g: Graph, sample_nodes: int | None = None, seed=0,
                         chunk: int = 256) -> float:
    """Mean fraction of each node's neighbors recovered among its nearest embeddings.

    For node u with k distinct out-neighbors other than itself, every other
    node is ranked by descending cosine similarity (ties by ascending index)
    and the top k are compared with the true neighbors.  Nodes without such
    neighbors are left out of the mean; nodes with an all-zero embedding
    score 0 and are logged.
    """
    emb = as_matrix(model)
    if emb.shape[0] != g.n:
        raise ConfigError(f"embedding has {emb.shape[0]} rows, graph has {g.n} nodes")
    norms = np.linalg.norm(emb, axis=1)
    unit = np.divide(emb, norms[:, None], out=np.zeros_like(emb), where=norms[:, None] > 0)
    nodes = np.arange(g.n)
    if sample_nodes is not None and sample_nodes < g.n:
        nodes = np.sort(np.random.default_rng(seed).choice(g.n, size=sample_nodes, replace=False))
    scores, flagged = [], 0
    for start in range(0, nodes.size, chunk):
        block = nodes[start : start + chunk]
        sims = unit[block] @ unit.T
        for row, u in zip(sims, block):
            nbrs = np.unique(g.neighbors(int(u)))
            nbrs = nbrs[nbrs != u]
            if nbrs.size == 0:
                continue
            if norms[u] == 0:
                flagged += 1
                scores.append(0.0)
                continue
            row[u] = -np.inf
            top = np.argsort(-row, kind="stable")[: nbrs.size]
            scores.append(np.intersect1d(top, nbrs).size / nbrs.size)
    if flagged:
        log.warning("%d nodes have all-zero embeddings and score 0", flagged)
    if not scores:
        raise ConfigError("no evaluated node has neighbors")
    return float(np.mean(scores))


def ndcg_at_k(model, oracle_rows, k: int) -> float:
    """Mean NDCG@k of the model's ranking ``W_u . B_v`` (v != u) against oracle rows.

    ``oracle_rows`` is a sequence of ``(node, distribution)`` pairs or a
    mapping; the node itself is excluded from both rankings.
    """
    pairs = list(oracle_rows.items()) if isinstance(oracle_rows, dict) else list(oracle_rows)
    if not pairs:
        raise ConfigError("no oracle rows")
    nodes = np.array([u for u, _ in pairs], dtype=np.int64)
    scores = _score_rows(model, nodes)
    n = scores.shape[1]
    if k < 1 or k >= n:
        raise ConfigError(f"k must lie in [1, {n - 1}]")
    return float(np.mean([
        ndcg_from_scores(s, np.asarray(p), k, exclude=int(u))
        for (u, p), s in zip(pairs, scores)
    ]))
