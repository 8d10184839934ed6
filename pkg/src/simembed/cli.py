"""Command-line entry point: ``simembed {train,eval,sweep,oracle,gen}``.

Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
malformed input, 3 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, InputError, SimEmbedError
from .evaluation import reports
from .evaluation.operators import EdgeOperator
from .evaluation.sweep import (
    ClassificationTask,
    ClusteringTask,
    LinkPredictionTask,
    ReconstructionTask,
    default_grid,
    hverse_sweep,
    parse_grid,
)
from .evaluation.tasks import (
    classification_eval,
    graph_reconstruction,
    kmeans,
    link_prediction_eval,
    load_labels,
    ndcg_at_k,
    sample_non_edges,
    split_pairs,
)
from .evaluation.metrics import modularity, nmi, undirected_edges
from .graph import Graph, load_edge_list, watts_strogatz, write_edge_list
from .similarity import EXACT_NODE_CAP, parse_spec, exact_rows
from .storage import FORMATS, atomic_write, load_model, save_model
from .trainer import PAPER_SCALE_EPOCHS, TrainConfig, train_fverse, train_verse

log = logging.getLogger("simembed")


class UsageError(ConfigError):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---- helpers --------------------------------------------------------------------


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def derived_seed(seed: int, repeat: int) -> int:
    return int(np.random.SeedSequence([int(seed), 3, repeat]).generate_state(1, np.uint64)[0])


def _jsonable(value):
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer, np.floating)):
        return value.item()
    return value


def write_manifest(primary, args, inputs, outputs, started: float, extra=None) -> Path:
    """Record the resolved run configuration next to ``primary``."""
    config = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("func", "argv")}
    manifest = {
        "command": ["simembed", *args.argv],
        "version": __version__,
        "config": config,
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): digest(p) for p in inputs if p is not None},
        "outputs": [str(p) for p in outputs],
        "started": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "duration_seconds": round(time.time() - started, 6),
    }
    if extra:
        manifest["result"] = extra
    path = Path(str(primary) + ".manifest.json")
    atomic_write(path, (json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n").encode())
    return path


def _graph(args, path_attr="graph") -> Graph:
    return load_edge_list(getattr(args, path_attr), remap=args.remap, symmetrize=args.symmetrize)


def _config(args) -> TrainConfig:
    epochs = args.epochs
    if args.paper_scale:
        epochs = PAPER_SCALE_EPOCHS["fverse" if args.full else "verse"]
    return TrainConfig(dim=args.dim, negatives=args.negatives, epochs=epochs, lr0=args.lr,
                       threads=args.threads, seed=args.seed, freeze_targets=args.freeze_targets)


def _train(g: Graph, spec, args):
    cfg = _config(args)
    gr = g.reversed()
    if args.full:
        return train_fverse(g, gr, spec, cfg)
    return train_verse(g, gr, spec, cfg)


def _load_embedding(args, g: Graph):
    model = load_model(args.embedding, None if args.embedding_format == "auto" else args.embedding_format,
                       n=g.n if args.embedding_format == "raw" else None, d=args.raw_dim)
    if model.n != g.n:
        raise InputError(f"embedding has {model.n} rows but the graph has {g.n} nodes")
    return model


def _format_prob(p: float) -> str:
    text = f"{p:.6g}"
    return text if any(ch in text for ch in ".en") else text + ".0"


# ---- commands -------------------------------------------------------------------


def cmd_train(args) -> int:
    started = time.time()
    g = _graph(args, "input")
    spec = parse_spec(args.similarity, args.order)
    model = _train(g, spec, args)
    if not model.is_finite():
        raise ConfigError(f"training diverged at --lr {args.lr}; nothing was written")
    save_model(model, args.output, args.format, args.concat_context)
    write_manifest(args.output, args, [args.input], [args.output], started,
                   {"nodes": g.n, "edges": g.m, "similarity": spec.label, "order": int(spec.order)})
    return 0


def _eval_linkpred(args, g, model, seed):
    rng = np.random.default_rng(seed)
    edges = undirected_edges(g) if args.symmetrize else np.column_stack(g.edges())
    edges = edges[edges[:, 0] != edges[:, 1]]
    if args.test_graph is not None:
        test_g = load_edge_list(args.test_graph, remap=False, symmetrize=args.symmetrize)
        if test_g.n > g.n:
            raise InputError(f"test graph has {test_g.n} nodes, training graph has {g.n}")
        test_edges = undirected_edges(test_g) if args.symmetrize else np.column_stack(test_g.edges())
        train_pos, test_pos = edges, test_edges[test_edges[:, 0] != test_edges[:, 1]]
        known = Graph.from_edges(*np.vstack([edges, test_pos]).T, n=g.n)
    else:
        log.warning("no --test-graph given; evaluating on a split of edges the embedding has seen")
        train_pos, test_pos = split_pairs(edges, args.train_fraction, rng)
        known = g
    if args.max_pairs:
        train_pos = train_pos[rng.permutation(len(train_pos))[: args.max_pairs]]
        test_pos = test_pos[rng.permutation(len(test_pos))[: args.max_pairs]]
    ratio = args.negative_ratio
    negs = sample_non_edges(known, int(round(ratio * (len(train_pos) + len(test_pos)))), rng)
    cut = int(round(ratio * len(train_pos)))
    op = EdgeOperator.parse(args.operator)
    acc = link_prediction_eval(model, train_pos, negs[:cut], test_pos, negs[cut:], op, seed)
    return {"accuracy": acc}


def _eval_classify(args, g, model, seed):
    labels = load_labels(args.labels, g)
    micro, macro = classification_eval(model, labels, args.train_fraction, args.mode, seed)
    return {"micro_f1": micro, "macro_f1": macro}


def _eval_cluster(args, g, model, seed):
    labels = load_labels(args.labels, g) if args.labels else None
    out = {}
    if args.k is not None:
        ks = [args.k]
    elif labels is not None:
        ks = [labels.label_count]
    else:
        ks = list(range(args.k_min, min(args.k_max, g.n) + 1, args.k_step))
    best_q, best_k, best_assign = -np.inf, None, None
    for k in ks:
        assignment = kmeans(model, k, seed)
        q = modularity(g, assignment)
        if q > best_q:
            best_q, best_k, best_assign = q, k, assignment
    out["modularity"] = best_q
    out["k"] = best_k
    if labels is not None:
        nodes = labels.nodes
        out["nmi"] = nmi(best_assign[nodes], labels.primary(nodes))
    return out


def _eval_reconstruct(args, g, model, seed):
    return {"precision": graph_reconstruction(model, g, args.sample_nodes, seed)}


def _eval_ndcg(args, g, model, seed):
    spec = parse_spec(args.similarity)
    nodes = np.arange(g.n) if args.nodes is None else np.asarray(args.nodes)
    if args.sample_nodes and args.sample_nodes < nodes.size:
        nodes = np.sort(np.random.default_rng(seed).choice(nodes, args.sample_nodes, replace=False))
    rows = exact_rows(g, spec, nodes, gr=g.reversed())
    k = 10 if args.k is None else args.k
    return {"ndcg": ndcg_at_k(model, list(zip(nodes.tolist(), rows)), k)}


EVAL_TASKS = {
    "linkpred": _eval_linkpred,
    "classify": _eval_classify,
    "cluster": _eval_cluster,
    "reconstruct": _eval_reconstruct,
    "ndcg": _eval_ndcg,
}


def cmd_eval(args) -> int:
    started = time.time()
    g = _graph(args)
    model = _load_embedding(args, g)
    if args.repeats < 1:
        raise ConfigError("--repeats must be at least 1")
    runs = [EVAL_TASKS[args.task](args, g, model, derived_seed(args.seed, r)) for r in range(args.repeats)]
    config = {"task": args.task, "repeats": args.repeats, "seed": args.seed}
    notes = []
    if args.task == "classify":
        config.update(train_fraction=args.train_fraction, mode=args.mode)
        if args.mode == "multilabel":
            notes.append(reports.MULTILABEL_NOTE)
    if args.task in ("classify", "linkpred"):
        notes.append(reports.CLASSIFIER_NOTE)
    if args.task == "ndcg":
        config.update(similarity=args.similarity, k=10 if args.k is None else args.k)
    out = []
    for metric in runs[0]:
        mean, sd = reports.summarize([r[metric] for r in runs])
        out.append(reports.EvalReport(args.task, metric, mean, getattr(args, "similarity", ""), "",
                                      args.seed, config, notes))
        out.append(reports.EvalReport(args.task, metric + "_sd", sd, getattr(args, "similarity", ""), "",
                                      args.seed, config, notes))
    output = Path(args.output) if args.output else Path(f"{args.embedding}.{args.task}.txt")
    table = output.with_suffix(".csv")
    text = reports.to_text(out)
    atomic_write(output, text.encode())
    atomic_write(table, reports.to_csv(out).encode())
    sys.stdout.write(text)
    write_manifest(output, args, [args.graph, args.embedding, getattr(args, "labels", None)],
                   [output, table], started, {r.metric: r.value for r in out})
    return 0


def _sweep_task(args, g):
    if args.task == "reconstruct":
        return ReconstructionTask(args.sample_nodes)
    if args.task == "classify":
        if not args.labels:
            raise ConfigError("--labels is required for the classify task")
        return ClassificationTask(load_labels(args.labels, g), args.train_fraction, args.mode)
    if args.task == "cluster":
        labels = load_labels(args.labels, g) if args.labels else None
        if args.k is None and labels is None:
            raise ConfigError("--k or --labels is required for the cluster task")
        return ClusteringTask(args.k if args.k is not None else labels.label_count, labels)
    if args.task == "linkpred":
        rng = np.random.default_rng(args.seed)
        edges = undirected_edges(g) if args.symmetrize else np.column_stack(g.edges())
        edges = edges[edges[:, 0] != edges[:, 1]]
        if args.max_pairs:
            edges = edges[rng.permutation(len(edges))[: args.max_pairs]]
        negs = sample_non_edges(g, int(round(args.negative_ratio * len(edges))), rng)
        return LinkPredictionTask(edges, negs, EdgeOperator.parse(args.operator))
    raise ConfigError(f"unknown task {args.task!r}")


def cmd_sweep(args) -> int:
    started = time.time()
    g = _graph(args)
    task = _sweep_task(args, g)
    if args.grid:
        texts = [t for item in args.grid for t in item.split(",") if t]
        grid = parse_grid(texts, args.order)
    else:
        grid = default_grid()
        if args.order is not None:
            grid = [s for s in grid if int(s.order) == args.order]
    output = Path(args.output)
    table = Path(args.table) if args.table else output.with_suffix(".csv")
    metric = task.metric
    header = ",".join(reports.CSV_HEADER) + ",seconds\n"
    table.write_text(header)

    def flush(cell):
        row = reports.EvalReport(task.name, metric, cell.score, cell.spec.label, int(cell.spec.order), cell.seed)
        with table.open("a") as fh:
            fh.write(reports.to_csv([row]).splitlines()[1] + f",{cell.seconds:.3f}\n")

    result = hverse_sweep(g, g.reversed(), task, _config(args), grid, args.full, on_cell=flush)
    save_model(result.best_model, output, args.format)
    summary = reports.to_text([], {"task": task.name, "metric": metric, "cells": len(result.table),
                                   "best": result.best.label, "best_order": int(result.best.order),
                                   "best_score": result.best_score})
    report_path = Path(str(output) + ".report.txt")
    atomic_write(report_path, summary.encode())
    sys.stdout.write(summary)
    write_manifest(output, args, [args.graph, args.labels], [output, table, report_path], started,
                   {"best": result.best.label, "order": int(result.best.order), "score": result.best_score})
    return 0


def cmd_oracle(args) -> int:
    started = time.time()
    g = _graph(args)
    spec = parse_spec(args.similarity)
    nodes = np.arange(g.n) if args.nodes is None else np.asarray(args.nodes, dtype=np.int64)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= g.n):
        raise ConfigError(f"node indices must lie in [0, {g.n})")
    rows = exact_rows(g, spec, nodes, gr=g.reversed(), cap=args.cap)
    lines = []
    for u, row in zip(nodes.tolist(), rows):
        for v in np.flatnonzero(row > args.min_prob):
            lines.append(f"{u} {v} {_format_prob(row[v])}")
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write(args.output, text.encode())
        write_manifest(args.output, args, [args.graph], [args.output], started)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gen_ws(args) -> int:
    started = time.time()
    g = watts_strogatz(args.nodes, args.k, args.beta, args.seed)
    write_edge_list(g, args.output)
    write_manifest(args.output, args, [], [args.output], started, {"nodes": g.n, "edges": g.m})
    return 0


def cmd_gen_split(args) -> int:
    """Hold out a fraction of undirected edges for link prediction."""
    started = time.time()
    g = load_edge_list(args.input, remap=args.remap, symmetrize=True)
    rng = np.random.default_rng(args.seed)
    edges = undirected_edges(g)
    edges = edges[edges[:, 0] != edges[:, 1]]
    keep, held = split_pairs(edges, args.train_fraction, rng)
    for path, part in ((args.train_output, keep), (args.test_output, held)):
        sub = Graph.from_edges(part[:, 0], part[:, 1], n=g.n)
        write_edge_list(sub, path)
    write_manifest(args.train_output, args, [args.input], [args.train_output, args.test_output], started,
                   {"train_edges": len(keep), "test_edges": len(held)})
    return 0


# ---- parser ---------------------------------------------------------------------


def _add_graph_flags(p, name="--graph"):
    p.add_argument(name, required=True, help="edge list, one 'u v' pair per line")
    p.add_argument("--symmetrize", action="store_true", help="add the reverse of every edge")
    p.add_argument("--remap", action="store_true", help="map arbitrary tokens to dense indices")


def _add_train_flags(p):
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--order", type=int, choices=(1, 2), default=None if p.prog.endswith("sweep") else 1)
    p.add_argument("--epochs", type=int, default=100, help="one epoch is n source draws (or n row updates with --full)")
    p.add_argument("--negatives", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.0025, help="initial learning rate, decayed linearly to 1e-4")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full", action="store_true", help="train on exact similarity rows")
    p.add_argument("--freeze-targets", action="store_true", help="with --full, update only source rows")
    p.add_argument("--paper-scale", action="store_true", help="use the large step budget preset")
    p.add_argument("--format", choices=FORMATS, default="verse")


def _add_eval_task_flags(p):
    p.add_argument("--labels", help="NODE<TAB>label[,label...] file")
    p.add_argument("--train-fraction", type=float, default=None)
    p.add_argument("--mode", choices=("multiclass", "multilabel"), default="multiclass")
    p.add_argument("--operator", default="hadamard", help="edge operator for link prediction")
    p.add_argument("--negative-ratio", type=float, default=1.0, help="negative pairs per positive")
    p.add_argument("--max-pairs", type=int, default=None, help="cap on positive pairs per split")
    p.add_argument("--sample-nodes", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="clusters, or the ndcg cutoff (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = Parser(prog="simembed", description="Similarity-driven node embeddings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("train", help="learn an embedding")
    _add_graph_flags(p, "--input")
    p.add_argument("--output", required=True)
    p.add_argument("--similarity", default="ppr:0.85", help="ppr:A | adj | simrank:C")
    p.add_argument("--concat-context", action="store_true", help="append the context matrix (order 2)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score an embedding")
    p.add_argument("task", choices=sorted(EVAL_TASKS))
    _add_graph_flags(p)
    p.add_argument("--embedding", required=True)
    p.add_argument("--embedding-format", choices=("auto", *FORMATS), default="auto")
    p.add_argument("--raw-dim", type=int, default=None, help="dimension of a raw embedding file")
    p.add_argument("--output", help="report path (default: next to the embedding)")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-graph", help="held-out edges for link prediction")
    p.add_argument("--similarity", default="ppr:0.85", help="oracle similarity for ndcg")
    p.add_argument("--nodes", type=int, nargs="+", help="source nodes for ndcg")
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=50)
    p.add_argument("--k-step", type=int, default=1)
    _add_eval_task_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="cross-validated choice of similarity")
    p.add_argument("--task", required=True, choices=("reconstruct", "classify", "cluster", "linkpred"))
    _add_graph_flags(p)
    p.add_argument("--output", required=True, help="best embedding path")
    p.add_argument("--table", help="per-cell CSV (default: output with .csv suffix)")
    p.add_argument("--grid", action="append", help="restrict the grid, e.g. ppr:0.85,adj")
    _add_train_flags(p)
    _add_eval_task_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="dump exact similarity rows")
    _add_graph_flags(p)
    p.add_argument("--similarity", default="ppr:0.85")
    p.add_argument("--nodes", type=int, nargs="+")
    p.add_argument("--output")
    p.add_argument("--min-prob", type=float, default=0.0, help="omit entries at or below this value")
    p.add_argument("--cap", type=int, default=EXACT_NODE_CAP)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("gen", help="generate graphs")
    gen = p.add_subparsers(dest="generator", required=True, parser_class=Parser)
    q = gen.add_parser("ws", help="Watts-Strogatz small-world graph")
    q.add_argument("--nodes", type=int, required=True)
    q.add_argument("--k", type=int, default=10, help="even ring-lattice degree")
    q.add_argument("--beta", type=float, default=0.1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--output", required=True)
    q.set_defaults(func=cmd_gen_ws)
    q = gen.add_parser("split", help="hold out edges for link prediction")
    q.add_argument("--input", required=True)
    q.add_argument("--remap", action="store_true")
    q.add_argument("--train-fraction", type=float, default=0.5)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--train-output", required=True)
    q.add_argument("--test-output", required=True)
    q.set_defaults(func=cmd_gen_split)
    return parser


def _fill_defaults(args):
    if getattr(args, "train_fraction", "missing") is None:
        args.train_fraction = 0.5 if args.task == "linkpred" else 0.1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.argv = argv
        _fill_defaults(args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SimEmbedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
