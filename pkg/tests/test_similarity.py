from fractions import Fraction

import numpy as np
import pytest

from simembed.errors import CapExceededError, ConfigError
from simembed.graph import from_pairs
from simembed.similarity import (
    Order,
    SimilaritySpec,
    alpha_for_window,
    deepwalk_window_distribution,
    empirical_row,
    exact_adjacency_rows,
    exact_ppr_row,
    exact_row,
    exact_rows,
    exact_simrank_matrix,
    parse_spec,
    sample_adjacency,
    sample_many,
    sample_ppr,
    sample_simrank,
    simrank_rows_from_matrix,
    simulate_window_sampling,
)

from conftest import random_digraph
from oracles import ppr_row_solve, simrank_pairwise, simrank_row_distribution, window_distribution

TWO_CYCLE = from_pairs([(0, 1), (1, 0)])
FAN = from_pairs([(2, 0), (2, 1)])  # c -> a, c -> b with a=0, b=1, c=2


def rng(seed=0):
    return np.random.default_rng(seed)


# ---- specs --------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, kind, param",
    [("ppr:0.85", "ppr", 0.85), ("adj", "adj", None), ("simrank:0.6", "simrank", 0.6), ("PPR:0.5", "ppr", 0.5)],
)
def test_parse_spec(text, kind, param):
    spec = parse_spec(text)
    assert (spec.kind, spec.param, spec.order) == (kind, param, Order.FIRST)


@pytest.mark.parametrize("text", ["simrank:1.5", "ppr:0", "ppr:1", "ppr", "adj:0.3", "katz:0.1", "ppr:x"])
def test_parse_spec_rejects(text):
    with pytest.raises(ConfigError):
        parse_spec(text)


def test_spec_label_round_trips():
    for spec in (SimilaritySpec("ppr", 0.85), SimilaritySpec("adj", None), SimilaritySpec("simrank", 0.25, 2)):
        assert parse_spec(spec.label, spec.order) == spec


# ---- personalized pagerank -------------------------------------------------------------


def test_ppr_zero_length_walk_returns_source():
    g = from_pairs([(0, 1), (1, 2), (2, 0)])
    alpha = 0.5
    seed = next(s for s in range(100) if rng(s).random() >= alpha)
    assert sample_ppr(g, 0, alpha, rng(seed)) == 0


def test_ppr_self_loop_node_always_returns_itself():
    g = from_pairs([(0, 0)])
    r = rng()
    assert all(sample_ppr(g, 0, 0.9, r) == 0 for _ in range(1000))


def test_ppr_two_cycle_empirical():
    row = empirical_row(TWO_CYCLE, SimilaritySpec("ppr", 0.85), 0, 10**6, rng(1))
    assert row[0] == pytest.approx(1 / 1.85, abs=0.003)
    assert row[1] == pytest.approx(0.85 / 1.85, abs=0.003)


def test_ppr_exact_two_cycle():
    np.testing.assert_allclose(exact_ppr_row(TWO_CYCLE, 0, 0.85), [1 / 1.85, 0.85 / 1.85], atol=1e-9)


def test_ppr_exact_self_loop():
    np.testing.assert_allclose(exact_ppr_row(from_pairs([(0, 0)]), 0, 0.85), [1.0])


def test_ppr_sink_sends_walker_home():
    # 0 -> 1, 1 is a sink: mass returns to 0
    g = from_pairs([(0, 1)])
    row = exact_ppr_row(g, 0, 0.5)
    np.testing.assert_allclose(row, ppr_row_solve(g, 0, 0.5), atol=1e-9)
    emp = empirical_row(g, SimilaritySpec("ppr", 0.5), 0, 200_000, rng(2))
    np.testing.assert_allclose(emp, row, atol=0.005)


@pytest.mark.parametrize("seed", range(5))
def test_ppr_exact_matches_linear_solve(seed):
    g = random_digraph(15, 0.15, rng(seed))
    for u in range(g.n):
        np.testing.assert_allclose(exact_ppr_row(g, u, 0.7), ppr_row_solve(g, u, 0.7), atol=1e-8)


def test_ppr_rows_are_distributions(karate):
    rows = exact_rows(karate, SimilaritySpec("ppr", 0.95))
    np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-6)
    assert rows.min() >= 0


# ---- adjacency ----------------------------------------------------------------


def test_adjacency_uniform_fan_out():
    draws = [sample_adjacency(FAN, 2, rng(0)) for _ in range(1)]
    assert draws[0] in (0, 1)
    row = empirical_row(FAN, SimilaritySpec("adj"), 2, 10**5, rng(3))
    assert row[0] == pytest.approx(0.5, abs=0.005)
    assert row[1] == pytest.approx(0.5, abs=0.005)


def test_adjacency_sink_is_no_sample():
    assert sample_adjacency(FAN, 0, rng()) is None
    assert np.all(sample_many(FAN, SimilaritySpec("adj"), 0, 10, rng()) == -1)


def test_adjacency_counts_parallel_edges():
    g = from_pairs([(0, 1), (0, 1), (0, 2)])
    row = empirical_row(g, SimilaritySpec("adj"), 0, 10**5, rng(4))
    assert row[1] == pytest.approx(2 / 3, abs=0.01)


def test_adjacency_exact_rows():
    rows = exact_adjacency_rows(FAN, [2, 0])
    np.testing.assert_allclose(rows[0], [0.5, 0.5, 0.0])
    np.testing.assert_allclose(rows[1], [1.0, 0.0, 0.0])  # sink: point mass on itself


def test_exact_row_dispatch():
    np.testing.assert_allclose(exact_row(FAN, None, SimilaritySpec("adj"), 2), [0.5, 0.5, 0])
    np.testing.assert_allclose(exact_row(TWO_CYCLE, None, SimilaritySpec("ppr", 0.85), 0), [1 / 1.85, 0.85 / 1.85])


# ---- simrank ------------------------------------------------------------------


def test_simrank_fan_one_iteration_and_fixed_point():
    for it in (1, 50):
        s = exact_simrank_matrix(FAN, 0.6, iterations=it)
        assert s[0, 1] == pytest.approx(0.6)
    s = exact_simrank_matrix(FAN, 0.6)
    assert s[0, 2] == 0.0  # c has no in-neighbors
    np.testing.assert_array_equal(np.diag(s), 1.0)


@pytest.mark.parametrize("seed", range(4))
def test_simrank_matches_pairwise_recursion(seed):
    g = random_digraph(12, 0.2, rng(seed))
    np.testing.assert_allclose(exact_simrank_matrix(g, 0.6, iterations=60), simrank_pairwise(g, 0.6), atol=1e-9)


def test_simrank_symmetric_bounded_monotone(karate):
    prev = exact_simrank_matrix(karate, 0.8, iterations=1)
    for it in range(2, 8):
        s = exact_simrank_matrix(karate, 0.8, iterations=it)
        assert np.all(s >= prev - 1e-12)
        prev = s
    np.testing.assert_allclose(prev, prev.T)
    assert prev.min() >= 0 and prev.max() <= 1 + 1e-12


def test_simrank_cap():
    g = from_pairs([(0, 1)], n=30)
    with pytest.raises(CapExceededError):
        exact_simrank_matrix(g, 0.5, cap=20)


def test_simrank_rows_drop_diagonal():
    s = exact_simrank_matrix(FAN, 0.6)
    rows = simrank_rows_from_matrix(s, [0, 2])
    np.testing.assert_allclose(rows[0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(rows[1], [0.0, 0.0, 1.0])  # nothing similar: point mass on itself
    for u in range(3):
        np.testing.assert_allclose(simrank_rows_from_matrix(s, [u])[0], simrank_row_distribution(s, u))


def test_simrank_sampler_on_fan():
    r = rng(5)
    # the only other node reachable by walk pairs from a is b
    assert set(sample_many(FAN, SimilaritySpec("simrank", 0.6), 0, 2000, r).tolist()) == {1}
    draws = np.array([sample_simrank(FAN, None, 0, 0.6, r) for _ in range(20_000)])
    # walk-pair weights: length 0 gives a weight 1, length 1 gives a and b weight c each
    assert np.mean(draws == 1) == pytest.approx(0.6 / 2.2, abs=0.01)


def test_simrank_sampler_source_without_in_edges():
    r = rng(6)
    assert all(sample_simrank(FAN, None, 2, 0.6, r) == 2 for _ in range(500))
    assert np.all(sample_many(FAN, SimilaritySpec("simrank", 0.6), 2, 50, r) == 2)


def test_simrank_sampler_tracks_exact_rows(karate):
    spec = SimilaritySpec("simrank", 0.6)
    exact = exact_rows(karate, spec)
    r = rng(7)
    for u in (0, 5, 33):
        emp = empirical_row(karate, spec, u, 100_000, r)
        assert 0.5 * np.abs(emp - exact[u]).sum() < 0.03


# ---- window lengths -----------------------------------------------------------


def test_window_distribution_examples():
    np.testing.assert_allclose(deepwalk_window_distribution(1), [1.0])
    assert deepwalk_window_distribution(2, exact=True) == [Fraction(2, 3), Fraction(1, 3)]
    w10 = deepwalk_window_distribution(10, exact=True)
    assert sum(w10) == 1 and w10[0] == Fraction(2, 11)


def test_window_distribution_matches_enumeration():
    for w in (1, 2, 3, 7, 10, 25):
        assert deepwalk_window_distribution(w, exact=True) == window_distribution(w)


def test_window_distribution_rejects_zero():
    with pytest.raises(ConfigError):
        deepwalk_window_distribution(0)


def test_alpha_for_window():
    assert alpha_for_window(10) == 9 / 11
    assert round(alpha_for_window(10), 2) == 0.82
    assert alpha_for_window(39) == 0.95
    assert alpha_for_window(2) == pytest.approx(1 / 3)
    with pytest.raises(ConfigError):
        alpha_for_window(1)


def test_window_simulation_quick(karate):
    freq = simulate_window_sampling(karate, 5, 200_000, rng(8))
    np.testing.assert_allclose(freq, deepwalk_window_distribution(5), atol=0.005)
