import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from trgg._rng import make_rng
from trgg.measures import PairMeasure, TypeAlphabet, TypeMeasure, empirical_pair_measure, empirical_type_measure
from trgg.models import (
    InfeasibleError,
    ModelParams,
    TypedGraph,
    neighbor_pairs,
    rank_pairs,
    read_edgelist,
    sample_conditional_trgg,
    sample_gnm_geometric,
    sample_positions,
    sample_trgg,
    sample_without_replacement,
    unrank_pairs,
)
from trgg.rates import log_poisson_pmf, unit_ball_volume

from oracles import brute_neighbor_pairs

AB = TypeAlphabet(("a", "b"))


def as_set(pairs):
    return set(map(tuple, np.asarray(pairs).tolist()))


# positions

def test_single_point_in_cube():
    p = sample_positions(1, 3, 0)
    assert p.shape == (1, 3) and ((p >= 0) & (p <= 1)).all()


def test_positions_mean():
    p = sample_positions(100_000, 2, 4)
    assert np.all(np.abs(p.mean(axis=0) - 0.5) < 0.005)


def test_positions_deterministic():
    assert np.array_equal(sample_positions(50, 2, 9), sample_positions(50, 2, 9))
    assert not np.array_equal(sample_positions(50, 2, 9), sample_positions(50, 2, 10))


# neighbor search

POINTS_1D = [0.1, 0.2, 0.9]


def test_neighbors_line_no_torus():
    assert as_set(neighbor_pairs(POINTS_1D, 0.15)) == {(0, 1)}


def test_neighbors_line_torus():
    # wrapped distance between 0.1 and 0.9 is 0.2
    assert as_set(neighbor_pairs(POINTS_1D, 0.15, torus=True)) == {(0, 1)}
    assert as_set(neighbor_pairs(POINTS_1D, 0.25, torus=True)) == {(0, 1), (0, 2)}


@st.composite
def instances(draw):
    n = draw(st.integers(0, 80))
    d = draw(st.integers(1, 3))
    m = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    R = rng.uniform(0.0, 0.6, size=(m, m))
    R = np.triu(R) + np.triu(R, 1).T
    R[0, 0] = max(R[0, 0], 0.01)
    if draw(st.booleans()):
        R[m - 1, 0] = R[0, m - 1] = 0.0 if m > 1 else R[0, 0]
    return rng.random((n, d)), R, rng.integers(0, m, size=n), draw(st.booleans())


@settings(max_examples=150, deadline=None)
@given(instances())
def test_neighbors_match_brute_force(inst):
    points, R, types, torus = inst
    got = neighbor_pairs(points, R, types, torus)
    assert as_set(got) == brute_neighbor_pairs(points, R, types, torus)
    assert len(got) == len(as_set(got))


def test_neighbors_accept_callable_radius():
    rng = np.random.default_rng(1)
    pts, types = rng.random((200, 2)), rng.integers(0, 2, 200)
    R = np.array([[0.05, 0.1], [0.1, 0.02]])
    assert as_set(neighbor_pairs(pts, lambda a, b: R[a, b], types)) == brute_neighbor_pairs(pts, R, types)


def test_neighbors_reject_bad_radius():
    with pytest.raises(ValueError):
        neighbor_pairs(POINTS_1D, 0.0)
    with pytest.raises(ValueError):
        neighbor_pairs(POINTS_1D, [[0.1, 0.2], [0.3, 0.1]], [0, 1, 0])


# TRGG

def test_trgg_clamped_radius_gives_complete_graph():
    n = 30
    for d, torus in ((1, False), (2, True), (3, True)):
        g = sample_trgg(ModelParams(n=n, dim=d, type_law=[0.5, 0.5], lam=1e9, torus=torus, seed=2))
        assert g.n_edges == n * (n - 1) // 2


def test_trgg_tiny_lambda_nearly_empty():
    eps = 1e-3
    g = sample_trgg(ModelParams(n=50_000, dim=2, type_law=[1.0], lam=eps, seed=3))
    assert g.degrees().mean() < 2 * eps * unit_ball_volume(2)


def test_trgg_torus_mean_degree():
    t = 1.0
    g = sample_trgg(ModelParams(n=20_000, dim=2, type_law=[1.0], lam=t, torus=True, seed=4))
    assert abs(g.degrees().mean() / (unit_ball_volume(2) * t) - 1) < 0.03


def test_trgg_types_follow_law_and_seed():
    params = ModelParams(n=400, dim=2, type_law=[0.2, 0.8], lam=[[1, 0], [0, 2]], seed=6)
    g = sample_trgg(params)
    assert g == sample_trgg(params)
    # lam(a, b) = 0: no mixed edges
    assert not (g.types[g.edges[:, 0]] != g.types[g.edges[:, 1]]).any()


def test_model_params_validation_and_no_aliasing():
    law = np.array([0.5, 0.5])
    ModelParams(n=10, dim=2, type_law=law, lam=1.0)
    law[0] = 0.9
    with pytest.raises(ValueError):
        ModelParams(n=10, dim=2, type_law=law, lam=1.0)
    with pytest.raises(ValueError):
        ModelParams(n=10, dim=2, type_law=[0.5, 0.5], lam=[[1, 2], [3, 1]])
    with pytest.raises(ValueError):
        ModelParams(n=10, dim=2, type_law=[1.0], lam=0.0)


# G(n, m)

def test_rank_unrank_roundtrip():
    idx = np.arange(200_000)
    i, j = unrank_pairs(idx)
    assert (i < j).all() and (i >= 0).all()
    assert np.array_equal(rank_pairs(i, j), idx)
    big = np.array([10**12, 10**12 + 7])
    assert np.array_equal(rank_pairs(*unrank_pairs(big)), big)


def test_gnm_complete():
    g = sample_gnm_geometric(4, 2, 6, 0)
    assert (g.degrees() == 3).all()


def test_gnm_empty():
    g = sample_gnm_geometric(10, 2, 0, 0)
    assert g.n_edges == 0 and (g.degrees() == 0).all()


def test_gnm_infeasible():
    with pytest.raises(InfeasibleError):
        sample_gnm_geometric(4, 2, 7, 0)


def test_gnm_poisson_limit():
    n = 20_000
    g = sample_gnm_geometric(n, 2, n, 8)
    assert g.n_edges == n and len(g.edge_set()) == n
    hist = np.bincount(g.degrees()) / n
    K = 60
    q = np.exp(log_poisson_pmf(2.0, np.arange(K)))
    p = np.pad(hist, (0, K - len(hist)))
    assert 0.5 * (np.abs(p - q).sum() + (1 - q.sum())) < 0.02


@pytest.mark.parametrize("pool,k", [(10, 2), (5, 3), (6, 6)])
def test_without_replacement_uniform(pool, k):
    rng = make_rng(12)
    subsets = list(itertools.combinations(range(pool), k))
    draws = Counter(tuple(sample_without_replacement(pool, k, rng).tolist()) for _ in range(200 * len(subsets)))
    assert set(draws) <= set(subsets)
    if len(subsets) > 1:
        assert chisquare([draws[s] for s in subsets]).pvalue > 1e-3


def test_gnm_uniform_over_edge_sets():
    rng = make_rng(13)
    counts = Counter(frozenset(sample_gnm_geometric(4, 1, 2, rng).edge_set()) for _ in range(6000))
    assert len(counts) == math.comb(6, 2)
    assert chisquare(list(counts.values())).pvalue > 1e-3


# conditional model

def test_conditional_forced_single_edge():
    tm = TypeMeasure(AB, [2, 2])
    pm = PairMeasure.from_edge_counts(AB, [[0, 1], [1, 0]], 4)
    g = sample_conditional_trgg(tm, pm, 0)
    assert g.n_edges == 1
    pm_g = empirical_pair_measure(g)
    # 1/n in each direction, total mass 2|E|/n
    assert pm_g.omega[0, 1] == pm_g.omega[1, 0] == 0.25
    assert pm_g.total_mass == 0.5


def test_conditional_complete_within_type():
    tm = TypeMeasure(AB, [5, 3])
    pm = PairMeasure.from_edge_counts(AB, [[10, 0], [0, 0]], 8)
    g = sample_conditional_trgg(tm, pm, 1)
    a_nodes = np.flatnonzero(g.types == 0)
    assert g.edge_set() == set(itertools.combinations(a_nodes.tolist(), 2))


@st.composite
def budgets(draw):
    m = draw(st.integers(1, 3))
    counts = draw(st.lists(st.integers(0, 8), min_size=m, max_size=m).filter(lambda c: sum(c) >= 1))
    e = np.zeros((m, m), dtype=np.int64)
    for a in range(m):
        for b in range(a, m):
            pool = counts[a] * (counts[a] - 1) // 2 if a == b else counts[a] * counts[b]
            e[a, b] = e[b, a] = draw(st.integers(0, pool))
    return counts, e, draw(st.integers(0, 2**32 - 1))


@settings(max_examples=100, deadline=None)
@given(budgets())
def test_conditional_hits_measures_exactly(case):
    counts, e, seed = case
    alphabet = TypeAlphabet.of_size(len(counts))
    tm = TypeMeasure(alphabet, counts)
    pm = PairMeasure.from_edge_counts(alphabet, e, tm.n)
    g = sample_conditional_trgg(tm, pm, seed)
    assert empirical_type_measure(g) == tm
    assert empirical_pair_measure(g) == pm


def test_conditional_uniform():
    tm = TypeMeasure(AB, [2, 2])
    pm = PairMeasure.from_edge_counts(AB, [[0, 2], [2, 0]], 4)
    rng = make_rng(14)
    counts = Counter()
    for _ in range(7200):
        g = sample_conditional_trgg(tm, pm, rng)
        counts[(tuple(g.types.tolist()), frozenset(g.edge_set()))] += 1
    # 6 type arrangements times 6 two-edge subsets of the 4 mixed pairs
    assert len(counts) == 36
    assert chisquare(list(counts.values())).pvalue > 1e-3


def test_conditional_infeasible_budget():
    tm = TypeMeasure(AB, [2, 1])
    with pytest.raises(InfeasibleError, match="pair budget exceeds pool"):
        sample_conditional_trgg(tm, PairMeasure.from_edge_counts(AB, [[2, 0], [0, 0]], 3), 0)
    with pytest.raises(InfeasibleError):
        sample_conditional_trgg(tm, PairMeasure(AB, [[1, 0], [0, 0]], 3), 0)


# container

def test_graph_roundtrips():
    g = sample_trgg(ModelParams(n=60, dim=3, type_law=[0.5, 0.5], lam=2.0, seed=15))
    assert TypedGraph.from_json(g.to_json()) == g
    n, d, edges = read_edgelist(g.to_edgelist())
    assert (n, d) == (60, 3) and np.array_equal(edges, g.edges)


def test_graph_canonicalizes_and_validates_edges():
    g = TypedGraph(np.zeros((3, 1)), np.zeros(3, dtype=int), TypeAlphabet(("a",)), np.array([[2, 0], [1, 0]]))
    assert g.edges.tolist() == [[0, 1], [0, 2]]
    with pytest.raises(ValueError):
        TypedGraph(np.zeros((3, 1)), np.zeros(3, dtype=int), TypeAlphabet(("a",)), np.array([[1, 1]]))
    with pytest.raises(ValueError):
        TypedGraph(np.zeros((3, 1)), np.zeros(3, dtype=int), TypeAlphabet(("a",)), np.array([[0, 1], [1, 0]]))
