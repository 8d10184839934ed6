"""Cross-validated selection of the similarity measure and its parameter."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError
from ..graph import Graph
from ..similarity import Order, SimilaritySpec, parse_spec
from ..trainer import TrainConfig, train_fverse, train_verse
from .classifiers import logistic_train, softmax_train
from .metrics import f1_scores, modularity, nmi
from .operators import EdgeOperator, pair_features
from .tasks import LabeledNodes, as_matrix, graph_reconstruction, kmeans

log = logging.getLogger(__name__)

PPR_GRID = (0.45, 0.55, 0.65, 0.75, 0.85, 0.95)
SIMRANK_GRID = (0.15, 0.25, 0.35, 0.45, 0.55, 0.65)
FOLDS = 5


def default_grid() -> list[SimilaritySpec]:
    """Both proximity orders crossed with every PPR, SimRank and adjacency cell (26 in total)."""
    cells = []
    for order in (Order.FIRST, Order.SECOND):
        cells += [SimilaritySpec("ppr", a, order) for a in PPR_GRID]
        cells += [SimilaritySpec("simrank", c, order) for c in SIMRANK_GRID]
        cells.append(SimilaritySpec("adj", None, order))
    return cells


def parse_grid(texts, order=None) -> list[SimilaritySpec]:
    """Grid from spec strings; without ``order`` each spec is expanded over both orders."""
    orders = (Order.FIRST, Order.SECOND) if order is None else (Order(int(order)),)
    return [parse_spec(t, o) for o in orders for t in texts]


def _folds(count: int, rng: np.random.Generator, folds: int = FOLDS):
    if count < folds:
        raise ConfigError(f"{folds}-fold cross-validation needs at least {folds} examples, got {count}")
    return np.array_split(rng.permutation(count), folds)


class SweepTask:
    """A scoring protocol; ``score`` returns a higher-is-better value for a trained model."""

    name = "task"
    metric = "score"

    def score(self, model, g: Graph, seed) -> float:
        raise NotImplementedError


@dataclass
class ReconstructionTask(SweepTask):
    sample_nodes: int | None = None
    name = "reconstruct"
    metric = "precision"

    def score(self, model, g, seed):
        return graph_reconstruction(model, g, self.sample_nodes, seed)


@dataclass
class ClassificationTask(SweepTask):
    labels: LabeledNodes
    train_fraction: float = 0.1
    mode: str = "multiclass"
    name = "classify"
    metric = "micro_f1"

    def score(self, model, g, seed):
        """Mean micro-F1 of 5-fold cross-validation inside the labeled training split."""
        emb = as_matrix(model)
        rng = np.random.default_rng(seed)
        nodes = rng.permutation(self.labels.nodes)
        train = nodes[: max(FOLDS, int(round(self.train_fraction * nodes.size)))]
        scores = []
        for held in _folds(train.size, rng):
            mask = np.ones(train.size, dtype=bool)
            mask[held] = False
            fit, test = train[mask], train[held]
            scores.append(self._fold(emb, fit, test, seed))
        return float(np.mean(scores))

    def _fold(self, emb, fit, test, seed):
        labs = self.labels
        if self.mode == "multiclass":
            y = labs.primary(fit)
            if np.unique(y).size < 2:
                pred = np.full(test.size, y[0])
            else:
                pred = softmax_train(emb[fit], y, seed=seed).predict(emb[test])
            truth = [{c} for c in labs.primary(test).tolist()]
            return f1_scores(truth, [{c} for c in pred.tolist()], sorted(set(y.tolist())))[0]
        seen = sorted({c for u in fit for c in labs.labels[int(u)]})
        pred = [set() for _ in test]
        for c in seen:
            y = np.array([c in labs.labels[int(u)] for u in fit], dtype=np.float64)
            if y.min() == y.max():
                hits = np.full(test.size, bool(y[0]))
            else:
                hits = logistic_train(emb[fit], y, seed=seed).predict_proba(emb[test]) > 0.5
            for i in np.flatnonzero(hits):
                pred[i].add(c)
        truth = [set(labs.labels[int(u)]) for u in test]
        return f1_scores(truth, pred, seen)[0]


@dataclass
class LinkPredictionTask(SweepTask):
    positives: np.ndarray
    negatives: np.ndarray
    op: EdgeOperator = EdgeOperator.HADAMARD
    name = "linkpred"
    metric = "accuracy"

    def score(self, model, g, seed):
        """Mean accuracy of 5-fold cross-validation over the labeled training pairs."""
        emb = as_matrix(model)
        pos = np.asarray(self.positives, dtype=np.int64).reshape(-1, 2)
        neg = np.asarray(self.negatives, dtype=np.int64).reshape(-1, 2)
        pairs = np.vstack([pos, neg])
        y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
        x = pair_features(self.op, emb, pairs)
        rng = np.random.default_rng(seed)
        scores = []
        for held in _folds(len(y), rng):
            mask = np.ones(len(y), dtype=bool)
            mask[held] = False
            if y[mask].min() == y[mask].max():
                raise ConfigError("a fold's training part holds a single class")
            clf = logistic_train(x[mask], y[mask], seed=seed)
            scores.append(np.mean(clf.predict(x[held]) == y[held]))
        return float(np.mean(scores))


@dataclass
class ClusteringTask(SweepTask):
    """NMI against labels when given, otherwise modularity of the k-means partition."""

    k: int
    labels: LabeledNodes | None = None
    name = "cluster"

    @property
    def metric(self):
        return "nmi" if self.labels is not None else "modularity"

    def score(self, model, g, seed):
        assignment = kmeans(model, self.k, seed)
        if self.labels is None:
            return modularity(g, assignment)
        nodes = self.labels.nodes
        return nmi(assignment[nodes], self.labels.primary(nodes))


@dataclass
class SweepCell:
    spec: SimilaritySpec
    score: float
    seed: int
    seconds: float


@dataclass
class SweepResult:
    best: SimilaritySpec
    best_score: float
    table: list[SweepCell] = field(default_factory=list)
    best_model: object = None


def cell_seed(seed, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), 2, index]).generate_state(1, np.uint64)[0])


def hverse_sweep(g: Graph, gr: Graph | None, task: SweepTask, cfg: TrainConfig,
                 grid=None, full: bool = False,
                 on_cell: Callable[[SweepCell], None] | None = None) -> SweepResult:
    """Train one model per grid cell, score it with ``task`` and keep the best.

    Ties go to the earliest cell in grid order.  ``on_cell`` is invoked after
    every finished cell, which lets callers persist partial tables.
    """
    if not isinstance(task, SweepTask):
        raise ConfigError("a scoring task is required")
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise ConfigError("empty grid")
    if gr is None:
        gr = g.reversed()
    best = None
    table = []
    for index, spec in enumerate(grid):
        seed = cell_seed(cfg.seed, index)
        cell_cfg = TrainConfig(**{**cfg.__dict__, "seed": seed})
        started = time.perf_counter()
        trainer = train_fverse if full else train_verse
        model = trainer(g, gr, spec, cell_cfg)
        score = task.score(model, g, seed)
        cell = SweepCell(spec, float(score), seed, time.perf_counter() - started)
        table.append(cell)
        log.info("cell %s: %s=%.4f", spec.label, task.metric, score)
        if on_cell is not None:
            on_cell(cell)
        if best is None or cell.score > best[0].score:
            best = (cell, model)
    return SweepResult(best[0].spec, best[0].score, table, best[1])
