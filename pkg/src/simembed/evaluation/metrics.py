"""Scoring functions: F1, NMI, modularity and NDCG."""
from __future__ import annotations

import logging

import numpy as np

from ..graph import Graph

log = logging.getLogger(__name__)


def f1_scores(true_sets, pred_sets, classes) -> tuple[float, float]:
    """Micro and macro F1 over label sets.

    ``true_sets`` and ``pred_sets`` are aligned sequences of label sets;
    macro F1 averages over ``classes``.
    """
    tp = dict.fromkeys(classes, 0)
    fp = dict.fromkeys(classes, 0)
    fn = dict.fromkeys(classes, 0)
    for truth, pred in zip(true_sets, pred_sets):
        for c in pred:
            if c in truth:
                tp[c] = tp.get(c, 0) + 1
            else:
                fp[c] = fp.get(c, 0) + 1
        for c in truth:
            if c not in pred:
                fn[c] = fn.get(c, 0) + 1
    all_tp, all_fp, all_fn = sum(tp.values()), sum(fp.values()), sum(fn.values())
    denom = 2 * all_tp + all_fp + all_fn
    micro = 2 * all_tp / denom if denom else 0.0
    per_class = []
    for c in classes:
        d = 2 * tp[c] + fp[c] + fn[c]
        per_class.append(2 * tp[c] / d if d else 0.0)
    macro = float(np.mean(per_class)) if per_class else 0.0
    return float(micro), macro


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(a, b) -> float:
    """Normalized mutual information ``I(a; b) / sqrt(H(a) H(b))``.

    Two single-cluster partitions score 1; if only one of them has zero
    entropy the score is 0.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"partition lengths differ: {a.size} vs {b.size}")
    if a.size == 0:
        raise ValueError("empty partitions")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    ha = _entropy(joint.sum(axis=1))
    hb = _entropy(joint.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    hab = _entropy(joint.ravel())
    mutual = ha + hb - hab
    return float(min(1.0, max(0.0, mutual / np.sqrt(ha * hb))))


def undirected_edges(g: Graph) -> np.ndarray:
    """Distinct unordered pairs (u <= v) of the graph, one row each."""
    src, dst = g.edges()
    lo = np.minimum(src, dst).astype(np.int64)
    hi = np.maximum(src, dst).astype(np.int64)
    keys = np.unique(lo * g.n + hi)
    return np.column_stack([keys // g.n, keys % g.n])


def modularity(g: Graph, assignment) -> float:
    """Newman modularity of a partition of the symmetrized simple graph.

    Each undirected edge counts once; a self-loop adds 2 to its node's degree.
    """
    assignment = np.asarray(assignment)
    if assignment.size != g.n:
        raise ValueError(f"assignment covers {assignment.size} nodes, graph has {g.n}")
    _, comm = np.unique(assignment, return_inverse=True)
    edges = undirected_edges(g)
    m = edges.shape[0]
    if m == 0:
        return 0.0
    cu, cv = comm[edges[:, 0]], comm[edges[:, 1]]
    k = comm.max() + 1
    inside = np.bincount(cu[cu == cv], minlength=k).astype(np.float64)
    degree = np.bincount(cu, minlength=k) + np.bincount(cv, minlength=k)
    return float(np.sum(inside / m - (degree / (2.0 * m)) ** 2))


def ndcg_from_scores(scores: np.ndarray, gains: np.ndarray, k: int, exclude=None) -> float:
    """NDCG@k of the ranking by descending ``scores`` against graded ``gains``.

    ``exclude`` removes one index (the source node) from both rankings.  A
    row whose ideal DCG is zero scores 1 since every ordering is ideal.
    """
    scores = np.asarray(scores, dtype=np.float64).copy()
    gains = np.asarray(gains, dtype=np.float64).copy()
    if exclude is not None:
        keep = np.ones(scores.size, dtype=bool)
        keep[exclude] = False
        scores, gains = scores[keep], gains[keep]
    if k < 1 or k > scores.size:
        raise ValueError(f"k must lie in [1, {scores.size}]")
    discount = 1.0 / np.log2(np.arange(2, k + 2))
    predicted = np.argsort(-scores, kind="stable")[:k]
    ideal = np.sort(gains)[::-1][:k]
    idcg = float(ideal @ discount)
    if idcg <= 0.0:
        return 1.0
    return float(gains[predicted] @ discount / idcg)
