"""Directed graphs in compressed sparse-row form.

A :class:`Graph` is immutable once built.  Node ids are dense integers in
``[0, n)``; when an edge list is loaded with ``remap=True`` the original
tokens are kept in ``node_names`` (index -> token) so results can be joined
back to labels later.

Duplicate edges are kept (multigraph semantics) and self-loops are ordinary
edges.  Undirected inputs have to be symmetrized explicitly.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import GraphFormatError, InputError


class Graph:
    """Immutable CSR adjacency: ``targets[offsets[u]:offsets[u + 1]]`` are u's out-neighbors."""

    __slots__ = ("offsets", "targets", "node_names", "_reversed", "_index", "_lookup")

    def __init__(self, offsets, targets, node_names: Sequence[str] | None = None):
        offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        targets = np.ascontiguousarray(targets, dtype=np.int32)
        if offsets.ndim != 1 or offsets.size < 1:
            raise ValueError("offsets must be a non-empty 1-D array")
        n = offsets.size - 1
        if offsets[0] != 0 or offsets[-1] != targets.size:
            raise ValueError("offsets must start at 0 and end at the edge count")
        if np.any(np.diff(offsets) < 0):
            raise ValueError("offsets must be nondecreasing")
        if targets.size and (targets.min() < 0 or targets.max() >= n):
            raise ValueError("edge target out of range")
        if node_names is not None and len(node_names) != n:
            raise ValueError("node_names must have one entry per node")
        offsets.setflags(write=False)
        targets.setflags(write=False)
        self.offsets = offsets
        self.targets = targets
        self.node_names = list(node_names) if node_names is not None else None
        self._reversed = None
        self._index = None
        self._lookup = None

    @classmethod
    def from_edges(cls, src, dst, n: int | None = None, node_names=None) -> "Graph":
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if n is None:
            n = int(max(src.max(initial=-1), dst.max(initial=-1))) + 1
        if n < 1:
            raise ValueError("graph needs at least one node")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise ValueError("edge endpoint out of range")
        # stable sort keeps the input order of each node's neighbors
        order = np.argsort(src, kind="stable")
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(offsets, dst[order], node_names)

    @property
    def n(self) -> int:
        return self.offsets.size - 1

    @property
    def m(self) -> int:
        return self.targets.size

    @property
    def nbytes(self) -> int:
        return self.offsets.nbytes + self.targets.nbytes

    def out_degree(self, u: int | None = None):
        if u is None:
            return np.diff(self.offsets)
        return int(self.offsets[u + 1] - self.offsets[u])

    def in_degree(self):
        return np.bincount(self.targets, minlength=self.n)

    def neighbors(self, u: int) -> np.ndarray:
        return neighbors(self, u)

    def sources(self) -> np.ndarray:
        """Source node of every edge, aligned with ``targets``."""
        return np.repeat(np.arange(self.n, dtype=np.int32), self.out_degree())

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.sources(), self.targets

    def reversed(self) -> "Graph":
        """The transposed graph, built once and cached."""
        if self._reversed is None:
            self._reversed = reverse(self)
        return self._reversed

    def symmetrized(self) -> "Graph":
        """Graph with every edge (u, v) also present as (v, u)."""
        src, dst = self.edges()
        return Graph.from_edges(
            np.concatenate([src, dst]), np.concatenate([dst, src]), self.n, self.node_names
        )

    def has_edge(self, u: int, v: int) -> bool:
        return bool(np.any(self.neighbors(u) == v))

    def edge_keys(self) -> np.ndarray:
        """Sorted unique ``u * n + v`` codes, for fast membership tests."""
        if self._index is None:
            src, dst = self.edges()
            self._index = np.unique(src.astype(np.int64) * self.n + dst)
        return self._index

    def index_of(self, token: str) -> int:
        if self.node_names is None:
            u = int(token)
            if not 0 <= u < self.n:
                raise KeyError(token)
            return u
        if self._lookup is None:
            self._lookup = {name: i for i, name in enumerate(self.node_names)}
        return self._lookup[token]

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets) and np.array_equal(
            self.targets, other.targets
        )

    def __hash__(self):
        return id(self)

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


ReversedGraph = Graph


def neighbors(g: Graph, u: int) -> np.ndarray:
    """Out-neighbors of ``u`` as a read-only view into the CSR arrays."""
    if not 0 <= u < g.n:
        raise IndexError(f"node {u} out of range for graph with {g.n} nodes")
    return g.targets[g.offsets[u] : g.offsets[u + 1]]


def reverse(g: Graph) -> Graph:
    src, dst = g.edges()
    return Graph.from_edges(dst, src, g.n, g.node_names)


def load_edge_list(path, remap: bool = False, symmetrize: bool = False) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` and blank lines are skipped.  Without
    ``remap`` every token must be a nonnegative integer and ``n`` is the
    largest id plus one; with ``remap`` tokens are numbered in order of
    first appearance.
    """
    src: list[int] = []
    dst: list[int] = []
    names: dict[str, int] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read edge list {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 2 tokens per edge, got {len(parts)}"
                )
            if remap:
                for tok in parts:
                    if tok not in names:
                        names[tok] = len(names)
                src.append(names[parts[0]])
                dst.append(names[parts[1]])
            else:
                try:
                    a, b = int(parts[0]), int(parts[1])
                except ValueError:
                    raise GraphFormatError(
                        f"{path}:{lineno}: non-integer node id (use remap for arbitrary tokens)"
                    ) from None
                if a < 0 or b < 0 or a > np.iinfo(np.int32).max or b > np.iinfo(np.int32).max:
                    raise GraphFormatError(f"{path}:{lineno}: node id out of range")
                src.append(a)
                dst.append(b)
    if not src:
        raise GraphFormatError(f"{path}: no edges found")
    if remap:
        g = Graph.from_edges(src, dst, len(names), list(names))
    else:
        g = Graph.from_edges(src, dst)
    return g.symmetrized() if symmetrize else g


def write_edge_list(g: Graph, path, use_names: bool = False) -> None:
    src, dst = g.edges()
    with open(path, "w", encoding="utf-8") as fh:
        if use_names and g.node_names is not None:
            names = g.node_names
            fh.writelines(f"{names[a]} {names[b]}\n" for a, b in zip(src.tolist(), dst.tolist()))
        else:
            fh.writelines(f"{a} {b}\n" for a, b in zip(src.tolist(), dst.tolist()))


def write_vocabulary(g: Graph, path) -> None:
    """One original token per line; the line number is the node index."""
    names = g.node_names if g.node_names is not None else [str(i) for i in range(g.n)]
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{name}\n" for name in names)


def read_vocabulary(path) -> list[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [line.rstrip("\n") for line in fh]
    except OSError as exc:
        raise InputError(f"cannot read vocabulary {path}: {exc.strerror}") from exc


def watts_strogatz(n: int, k: int, beta: float, seed=None) -> Graph:
    """Symmetric small-world graph: ring lattice of degree ``k`` with rewiring.

    Each lattice edge (u, u + j), j = 1..k/2, has its far endpoint replaced by
    a uniform node other than ``u`` with probability ``beta``.  Rewiring can
    produce parallel edges; they are kept.
    """
    if k % 2 or k < 2 or k >= n:
        raise ValueError("k must be even with 2 <= k < n")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    half = k // 2
    src = np.repeat(np.arange(n, dtype=np.int64), half)
    dst = (src + np.tile(np.arange(1, half + 1), n)) % n
    rewire = rng.random(src.size) < beta
    # uniform over the n - 1 nodes other than src
    fresh = rng.integers(0, n - 1, size=int(rewire.sum()))
    fresh += fresh >= src[rewire]
    dst[rewire] = fresh
    return Graph.from_edges(np.concatenate([src, dst]), np.concatenate([dst, src]), n)


def from_pairs(pairs: Iterable[tuple[int, int]], n: int | None = None) -> Graph:
    pairs = list(pairs)
    if not pairs:
        if n is None:
            raise ValueError("n is required for an edgeless graph")
        return Graph(np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int32))
    src, dst = zip(*pairs)
    return Graph.from_edges(src, dst, n)
