"""Vertex similarity measures: one-sample draws and exact distribution rows.

Three measures are supported:

* Personalized PageRank, parameterized by the continuation probability
  ``alpha`` (a walk restarts with probability ``1 - alpha``, so 0.85 is the
  classical damping factor).  A sample is the endpoint of a single random
  walk with restart; stepping out of a sink jumps back to the source.
* Adjacency: a uniform out-neighbor.  Sinks produce no sample.
* SimRank, approximated by a pair of walks that each continue with
  probability ``sqrt(c)``: a reversed walk from the source, then a walk of
  the same length that retraces reversed steps in the forward direction.
  The draw follows sum_k c^k (Q^k Q^k^T)(u, .), the meeting-walk form of
  SimRank without the first-meeting restriction.

The samplers are numba kernels that take an explicit
``numpy.random.Generator`` so any number of workers can draw concurrently
from the same immutable graph.  The exact rows are the oracles the samplers
are tested against and the training targets of the full-distribution
trainer.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np
import scipy.sparse as sp

from .errors import CapExceededError, ConfigError
from .graph import Graph

EXACT_NODE_CAP = 2000
SIMRANK_WEIGHT_CAP = 64.0
SELF_ATTEMPTS = 10_000

PPR, ADJACENCY, SIMRANK = 0, 1, 2
NO_SAMPLE = -1


class Order(enum.IntEnum):
    FIRST = 1
    SECOND = 2


@dataclass(frozen=True)
class SimilaritySpec:
    kind: str = "ppr"
    param: float | None = 0.85
    order: Order = Order.FIRST

    def __post_init__(self):
        if self.kind not in ("ppr", "adj", "simrank"):
            raise ConfigError(f"unknown similarity kind {self.kind!r}")
        if self.kind == "adj":
            object.__setattr__(self, "param", None)
        elif self.param is None or not 0.0 < float(self.param) < 1.0:
            name = "alpha" if self.kind == "ppr" else "c"
            raise ConfigError(f"{self.kind} {name} must lie strictly inside (0, 1), got {self.param}")
        else:
            object.__setattr__(self, "param", float(self.param))
        object.__setattr__(self, "order", Order(int(self.order)))

    @property
    def code(self) -> int:
        return {"ppr": PPR, "adj": ADJACENCY, "simrank": SIMRANK}[self.kind]

    @property
    def label(self) -> str:
        return self.kind if self.param is None else f"{self.kind}:{self.param:g}"

    def __str__(self):
        return self.label


def parse_spec(text: str, order: int | Order = Order.FIRST) -> SimilaritySpec:
    """Parse ``"ppr:0.85"``, ``"adj"`` or ``"simrank:0.6"``."""
    kind, _, param = text.strip().partition(":")
    kind = kind.lower()
    aliases = {"adjacency": "adj", "pagerank": "ppr"}
    kind = aliases.get(kind, kind)
    if kind == "adj":
        if param:
            raise ConfigError("adj takes no parameter")
        return SimilaritySpec("adj", None, order)
    if kind not in ("ppr", "simrank"):
        raise ConfigError(f"unknown similarity {text!r}; expected ppr:A, adj or simrank:C")
    if not param:
        raise ConfigError(f"{kind} needs a parameter, e.g. {kind}:0.5")
    try:
        value = float(param)
    except ValueError:
        raise ConfigError(f"bad {kind} parameter {param!r}") from None
    return SimilaritySpec(kind, value, order)


# ---- sampling kernels -------------------------------------------------------


@numba.njit(nogil=True, cache=True)
def _uniform(rng, n):
    i = int(rng.random() * n)
    return i if i < n else n - 1


@numba.njit(nogil=True, cache=True)
def _ppr_walk(offsets, targets, u, alpha, rng):
    v = u
    while rng.random() < alpha:
        deg = offsets[v + 1] - offsets[v]
        if deg == 0:
            v = u
        else:
            v = targets[offsets[v] + _uniform(rng, deg)]
    return v


@numba.njit(nogil=True, cache=True)
def _adjacency_draw(offsets, targets, u, rng):
    deg = offsets[u + 1] - offsets[u]
    if deg == 0:
        return -1
    return targets[offsets[u] + _uniform(rng, deg)]


@numba.njit(nogil=True, cache=True)
def _simrank_walk(offsets, targets, roffsets, rtargets, u, c, bound, skip_self, rng):
    # Target: P(v) proportional to sum_k c^k sum_w Q^k(u, w) Q^k(v, w), Q the
    # reversed-walk transition.  Two legs that each survive a step with
    # probability sqrt(c) share a geometric length with continuation c.  Leg
    # one walks reversed edges from u; leg two retraces k steps forward with
    # uniform proposals corrected by the importance ratio out(prev) / in(next),
    # accepted against ``bound``.  Walks into dead ends are rejected.  With
    # skip_self the length starts at 1 and draws ending at u are rejected; u
    # is returned only when the attempt budget runs out.
    if skip_self and roffsets[u + 1] == roffsets[u]:
        return u
    attempts = 0
    while True:
        attempts += 1
        if skip_self and attempts > SELF_ATTEMPTS:
            return u
        length = 1 if skip_self else 0
        while rng.random() < c:
            length += 1
        w = u
        alive = True
        for _ in range(length):
            deg = roffsets[w + 1] - roffsets[w]
            if deg == 0:
                alive = False
                break
            w = rtargets[roffsets[w] + _uniform(rng, deg)]
        if not alive:
            continue
        weight = 1.0
        for _ in range(length):
            deg = offsets[w + 1] - offsets[w]
            if deg == 0:
                alive = False
                break
            x = targets[offsets[w] + _uniform(rng, deg)]
            weight *= deg / (roffsets[x + 1] - roffsets[x])
            w = x
        if not alive or (skip_self and w == u):
            continue
        if weight >= bound or rng.random() * bound < weight:
            return w


@numba.njit(nogil=True, cache=True)
def _draw(kind, param, bound, offsets, targets, roffsets, rtargets, u, rng):
    """Training draw; SimRank skips self-similarity, matching the exact rows."""
    if kind == 0:
        return _ppr_walk(offsets, targets, u, param, rng)
    if kind == 1:
        return _adjacency_draw(offsets, targets, u, rng)
    return _simrank_walk(offsets, targets, roffsets, rtargets, u, param, bound, True, rng)


@numba.njit(nogil=True, cache=True)
def _draw_many(kind, param, bound, offsets, targets, roffsets, rtargets, u, count, rng):
    out = np.empty(count, dtype=np.int64)
    for i in range(count):
        out[i] = _draw(kind, param, bound, offsets, targets, roffsets, rtargets, u, rng)
    return out


def _kernel_param(spec: SimilaritySpec) -> float:
    return 0.0 if spec.param is None else spec.param


def simrank_weight_bound(g: Graph, gr: Graph | None = None, cap: float = SIMRANK_WEIGHT_CAP) -> float:
    """Acceptance bound for the SimRank sampler's importance weights.

    On symmetric graphs the weight of a draw telescopes to
    deg(turning node) / deg(result), so max-out / min-in is exact there.  On
    directed graphs longer products can exceed it; such draws are accepted
    unconditionally (weights clipped), as are all draws when the bound hits
    ``cap``.
    """
    gr = g.reversed() if gr is None else gr
    out_deg = g.out_degree()
    in_deg = gr.out_degree()
    if not np.any(in_deg > 0) or not np.any(out_deg > 0):
        return 1.0
    return float(min(cap, max(1.0, out_deg.max() / in_deg[in_deg > 0].min())))


def kernel_args(g: Graph, gr: Graph | None, spec: SimilaritySpec):
    """(kind code, parameter, weight bound, reversed offsets, reversed targets) for the kernels."""
    if spec.kind != "simrank":
        return spec.code, _kernel_param(spec), 1.0, g.offsets, g.targets
    gr = g.reversed() if gr is None else gr
    return spec.code, _kernel_param(spec), simrank_weight_bound(g, gr), gr.offsets, gr.targets


def _check_node(g: Graph, u: int) -> int:
    u = int(u)
    if not 0 <= u < g.n:
        raise IndexError(f"node {u} out of range for graph with {g.n} nodes")
    return u


def sample_ppr(g: Graph, u: int, alpha: float, rng: np.random.Generator) -> int:
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie strictly inside (0, 1)")
    return int(_ppr_walk(g.offsets, g.targets, _check_node(g, u), alpha, rng))


def sample_adjacency(g: Graph, u: int, rng: np.random.Generator) -> int | None:
    """Uniform out-neighbor of ``u``, or None when ``u`` is a sink."""
    v = int(_adjacency_draw(g.offsets, g.targets, _check_node(g, u), rng))
    return None if v == NO_SAMPLE else v


def sample_simrank(g: Graph, gr: Graph | None, u: int, c: float, rng: np.random.Generator) -> int:
    if not 0.0 < c < 1.0:
        raise ConfigError("c must lie strictly inside (0, 1)")
    gr = g.reversed() if gr is None else gr
    bound = simrank_weight_bound(g, gr)
    return int(
        _simrank_walk(
            g.offsets, g.targets, gr.offsets, gr.targets, _check_node(g, u), c, bound, False, rng
        )
    )


def sample(g: Graph, spec: SimilaritySpec, u: int, rng: np.random.Generator, gr: Graph | None = None):
    if spec.kind == "ppr":
        return sample_ppr(g, u, spec.param, rng)
    if spec.kind == "adj":
        return sample_adjacency(g, u, rng)
    return sample_simrank(g, gr, u, spec.param, rng)


def sample_many(
    g: Graph, spec: SimilaritySpec, u: int, count: int, rng: np.random.Generator, gr: Graph | None = None
) -> np.ndarray:
    """``count`` independent training draws from ``u``.

    Sinks yield ``NO_SAMPLE`` (-1) under adjacency; SimRank draws exclude
    ``u`` itself unless no other node is reachable.
    """
    kind, param, bound, roff, rtgt = kernel_args(g, gr, spec)
    return _draw_many(kind, param, bound, g.offsets, g.targets, roff, rtgt, _check_node(g, u), count, rng)


def empirical_row(
    g: Graph, spec: SimilaritySpec, u: int, count: int, rng: np.random.Generator, gr: Graph | None = None
) -> np.ndarray:
    draws = sample_many(g, spec, u, count, rng, gr)
    draws = draws[draws >= 0]
    if draws.size == 0:
        return np.zeros(g.n)
    return np.bincount(draws, minlength=g.n) / draws.size


# ---- exact rows ---------------------------------------------------------------


def _transition(g: Graph) -> sp.csr_matrix:
    """Row-normalized adjacency with multiplicities; sink rows stay empty."""
    deg = g.out_degree().astype(np.float64)
    src = g.sources()
    weights = 1.0 / deg[src]
    a = sp.csr_matrix((weights, (src, g.targets)), shape=(g.n, g.n))
    a.sum_duplicates()
    return a


def exact_ppr_rows(g: Graph, sources, alpha: float, tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """PPR rows for several sources at once by power iteration.

    Iterates ``pi <- (1 - alpha) e_u + alpha pi A_u`` where ``A_u`` is the
    row-normalized adjacency with sink rows replaced by ``e_u``, until the
    largest per-row L1 change drops below ``tol``.
    """
    if not 0.0 < alpha < 1.0:
        raise ConfigError("alpha must lie strictly inside (0, 1)")
    if tol <= 0:
        raise ConfigError("tol must be positive")
    sources = np.asarray(sources, dtype=np.int64).ravel()
    if sources.size and (sources.min() < 0 or sources.max() >= g.n):
        raise IndexError("source node out of range")
    at = _transition(g).T.tocsr()
    sinks = g.out_degree() == 0
    rows = np.arange(sources.size)
    restart = np.zeros((sources.size, g.n))
    restart[rows, sources] = 1.0
    pi = restart.copy()
    for _ in range(max_iter):
        nxt = alpha * (at @ pi.T).T
        nxt[rows, sources] += alpha * pi[:, sinks].sum(axis=1)
        nxt += (1.0 - alpha) * restart
        delta = np.abs(nxt - pi).sum(axis=1).max(initial=0.0)
        pi = nxt
        if delta < tol:
            break
    return pi / pi.sum(axis=1, keepdims=True)


def exact_ppr_row(g: Graph, u: int, alpha: float, tol: float = 1e-10) -> np.ndarray:
    return exact_ppr_rows(g, [_check_node(g, u)], alpha, tol)[0]


def exact_adjacency_rows(g: Graph, sources) -> np.ndarray:
    sources = np.asarray(sources, dtype=np.int64).ravel()
    out = np.zeros((sources.size, g.n))
    for i, u in enumerate(sources):
        nbrs = neighbors_of(g, u)
        if nbrs.size == 0:
            out[i, u] = 1.0
        else:
            out[i] = np.bincount(nbrs, minlength=g.n) / nbrs.size
    return out


def neighbors_of(g: Graph, u) -> np.ndarray:
    return g.targets[g.offsets[u] : g.offsets[u + 1]]


def exact_simrank_matrix(
    g: Graph, c: float, iterations: int = 50, cap: int = EXACT_NODE_CAP, tol: float = 0.0
) -> np.ndarray:
    """All-pairs SimRank by fixed-point iteration from the identity.

    In-neighbor averages use edge multiplicities.  Pairs where either node
    has no in-neighbors stay at 0 off the diagonal; the diagonal is pinned
    to 1.  Stops early once the largest entry change is at most ``tol``.
    """
    if not 0.0 < c < 1.0:
        raise ConfigError("c must lie strictly inside (0, 1)")
    if iterations < 1:
        raise ConfigError("iterations must be at least 1")
    if g.n > cap:
        raise CapExceededError(f"exact SimRank needs n <= {cap}, graph has {g.n} nodes")
    # q[u, i] = multiplicity of in-edge i -> u over |I(u)|
    q = _transition(g.reversed())
    s = np.eye(g.n)
    for _ in range(iterations):
        nxt = c * (q @ (q @ s).T)
        np.fill_diagonal(nxt, 1.0)
        nxt = 0.5 * (nxt + nxt.T)
        done = np.abs(nxt - s).max() <= tol
        s = nxt
        if done:
            break
    return s


def simrank_rows_from_matrix(s: np.ndarray, sources) -> np.ndarray:
    sources = np.asarray(sources, dtype=np.int64).ravel()
    rows = s[sources].copy()
    rows[np.arange(sources.size), sources] = 0.0
    totals = rows.sum(axis=1)
    empty = totals <= 0
    rows[~empty] /= totals[~empty, None]
    rows[np.flatnonzero(empty), sources[empty]] = 1.0
    return rows


def exact_rows(
    g: Graph,
    spec: SimilaritySpec,
    sources=None,
    gr: Graph | None = None,
    cap: int = EXACT_NODE_CAP,
    simrank_iterations: int = 50,
) -> np.ndarray:
    """Exact target distributions for ``sources`` (all nodes by default), one row each."""
    if sources is None:
        sources = np.arange(g.n)
    if spec.kind == "ppr":
        return exact_ppr_rows(g, sources, spec.param)
    if spec.kind == "adj":
        return exact_adjacency_rows(g, sources)
    if gr is not None and gr.n != g.n:
        raise ValueError("reversed graph does not match")
    s = exact_simrank_matrix(g, spec.param, simrank_iterations, cap=cap)
    return simrank_rows_from_matrix(s, sources)


def exact_row(g: Graph, gr: Graph | None, spec: SimilaritySpec, u: int) -> np.ndarray:
    return exact_rows(g, spec, [_check_node(g, u)], gr)[0]


# ---- random-walk window lengths -----------------------------------------------


def deepwalk_window_distribution(w: int, exact: bool = False):
    """Probability that a skip-gram context with window ``w`` sits at distance j = 1..w.

    ``exact=True`` returns :class:`fractions.Fraction` values.
    """
    if w < 1:
        raise ConfigError("window size must be at least 1")
    if exact:
        return [Fraction(2 * (w - j + 1), w * (w + 1)) for j in range(1, w + 1)]
    j = np.arange(1, w + 1)
    return 2.0 * (w - j + 1) / (w * (w + 1))


def alpha_for_window(w: int) -> float:
    """PPR continuation probability matching a skip-gram window of size ``w``."""
    if w < 2:
        raise ConfigError("window size must be at least 2")
    return (w - 1) / (w + 1)


def simulate_window_sampling(g: Graph, w: int, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical distance distribution of skip-gram context pairs on real walks.

    For a uniform node v, two random walks of ``w`` steps start at v, so v
    is the centre of a window of ``2w + 1`` nodes.  A reduced window
    b ~ U{1..w} is drawn and every walk node at distance 1..b on either side
    becomes a context of v.  Returns the frequency of each distance 1..w
    over the first ``samples`` context pairs.  Walks stop early at sinks.
    """
    if w < 1:
        raise ConfigError("window size must be at least 1")
    if samples < 1:
        raise ConfigError("samples must be positive")
    counts = _window_counts(g.offsets, g.targets, w, samples, rng)
    return counts[1:] / counts.sum()


@numba.njit(nogil=True, cache=True)
def _walk_reach(offsets, targets, v, steps, rng):
    """Number of steps a random walk from v completes before hitting a sink."""
    done = 0
    for _ in range(steps):
        deg = offsets[v + 1] - offsets[v]
        if deg == 0:
            break
        v = targets[offsets[v] + _uniform(rng, deg)]
        done += 1
    return done


@numba.njit(nogil=True, cache=True)
def _window_counts(offsets, targets, w, samples, rng):
    n = offsets.shape[0] - 1
    counts = np.zeros(w + 1, dtype=np.int64)
    taken = 0
    while taken < samples:
        v = _uniform(rng, n)
        left = _walk_reach(offsets, targets, v, w, rng)
        right = _walk_reach(offsets, targets, v, w, rng)
        b = 1 + _uniform(rng, w)
        for j in range(1, b + 1):
            for reach in (left, right):
                if j <= reach and taken < samples:
                    counts[j] += 1
                    taken += 1
    return counts
