from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import clique_edges, graph_from_edges
from overlapcomm.fcore import (
    BRUTE_FORCE_LIMIT,
    FCoreParams,
    boundary_vertices,
    brute_force_fcores,
    feasible_masks,
    peel,
    verify,
)

TRIANGLE_PENDANT = [(1, 2), (2, 3), (1, 3), (3, 4)]


def _random_graph(seed: int, n: int | None = None, p: float | None = None):
    rng = np.random.default_rng(seed)
    n = n if n is not None else int(rng.integers(4, 13))
    p = p if p is not None else float(rng.uniform(0.2, 0.7))
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return graph_from_edges(n, edges), oracles.adjacency(n, edges), rng


def _enumerate_maximal(adj, f) -> list[frozenset]:
    n = len(adj)
    feas = [frozenset(s) for k in range(2, n + 1) for s in combinations(range(n), k)
            if oracles.fcore_feasible(adj, set(s), f)]
    return [s for s in feas if not any(s < t for t in feas)]


# -- verify ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 6, 9])
def test_complete_graph_feasible_at_one(n):
    g = graph_from_edges(n, clique_edges(range(n)))
    assert verify(g, range(n), 1.0)


def test_pendant_breaks_feasibility():
    g = graph_from_edges(5, TRIANGLE_PENDANT)
    assert not verify(g, [1, 2, 3, 4], 0.6)
    assert verify(g, [1, 2, 3], 0.6)


def test_disconnected_set_not_feasible():
    g = graph_from_edges(6, clique_edges(range(3)) + clique_edges(range(3, 6)))
    assert not verify(g, range(6), 0.1)


def test_verify_needs_two_vertices():
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        verify(g, [0], 0.5)


@pytest.mark.parametrize("f", [0, -0.1, 1.01])
def test_threshold_range(f):
    with pytest.raises(ValueError):
        FCoreParams(f)


@pytest.mark.parametrize("seed", range(20))
def test_verify_matches_direct_check(seed):
    g, adj, rng = _random_graph(seed)
    for _ in range(30):
        k = int(rng.integers(2, g.n + 1))
        s = set(rng.choice(g.n, size=k, replace=False).tolist())
        for f in (0.2, 0.5, 0.75, 1.0):
            assert verify(g, s, f) == oracles.fcore_feasible(adj, s, f)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_threshold_monotonicity(seed, f1, f2):
    f1, f2 = min(f1, f2), max(f1, f2)
    g, _, rng = _random_graph(seed)
    s = rng.choice(g.n, size=int(rng.integers(2, g.n + 1)), replace=False)
    if verify(g, s, f2):
        assert verify(g, s, f1)


# -- peel --------------------------------------------------------------------------------


def test_feasible_seed_unchanged():
    g = graph_from_edges(5, clique_edges(range(5)))
    assert peel(g, range(5), 0.9).tolist() == [0, 1, 2, 3, 4]


def test_pendant_removed():
    g = graph_from_edges(5, TRIANGLE_PENDANT)
    assert peel(g, [1, 2, 3, 4], 0.6).tolist() == [1, 2, 3]


def test_star_peels_leaves_in_id_order():
    g = graph_from_edges(6, [(0, k) for k in range(1, 6)])
    assert peel(g, range(6), 0.6).tolist() == [0, 5]


def test_nothing_survives_without_edges():
    g = graph_from_edges(5, [])
    assert peel(g, range(5), 0.5).tolist() == []


def test_larger_component_kept():
    edges = clique_edges(range(3)) + clique_edges(range(3, 7)) + [(2, 3)]
    g = graph_from_edges(7, edges)
    assert peel(g, range(7), 0.6).tolist() == [3, 4, 5, 6]


def test_equal_components_keep_smallest_id():
    # every b is 2/5, so nothing is peeled and the two triangles tie on size
    g = graph_from_edges(6, clique_edges([4, 5, 3]) + clique_edges([0, 1, 2]))
    assert peel(g, range(6), 0.4).tolist() == [0, 1, 2]


def test_lowest_id_peeled_first_on_ties():
    g = graph_from_edges(6, clique_edges([4, 5, 3]) + clique_edges([0, 1, 2]))
    assert peel(g, range(6), 0.5).tolist() == [3, 4, 5]


def test_peel_against_exhaustive_oracle(record_property):
    maximal_hits = total = 0
    for seed in range(50):
        g, adj, rng = _random_graph(1000 + seed)
        cores = [frozenset(c.tolist()) for c in brute_force_fcores(g, 0.5)]
        for seed_set in (range(g.n), rng.choice(g.n, size=max(2, g.n - 2), replace=False)):
            out = peel(g, seed_set, 0.5)
            if len(out) == 0:
                continue
            got = frozenset(out.tolist())
            total += 1
            assert oracles.fcore_feasible(adj, set(got), 0.5)
            assert got <= set(np.asarray(seed_set).tolist())
            assert any(got <= c for c in cores)
            maximal_hits += got in cores
    share = maximal_hits / total
    record_property("peel_maximal_share", share)
    print(f"peel output is itself maximal in {maximal_hits}/{total} cases ({share:.1%})")
    assert total >= 50


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.3, 0.5, 0.7, 1.0]))
def test_peel_idempotent_and_feasible(seed, f):
    g, adj, rng = _random_graph(seed, n=int(np.random.default_rng(seed).integers(4, 25)))
    out = peel(g, range(g.n), f)
    if len(out):
        assert verify(g, out, f)
        assert peel(g, out, f).tolist() == out.tolist()


def test_boundary_vertex_reported():
    # vertex 4 is adjacent to 3 of the 4 members, vertex 5 to only one
    g = graph_from_edges(6, clique_edges(range(4)) + [(4, 0), (4, 1), (4, 2), (5, 0)])
    assert boundary_vertices(g, range(4), 0.5).tolist() == [4]
    assert boundary_vertices(g, [], 0.5).tolist() == []


# -- exhaustive oracle ------------------------------------------------------------------------


def test_k4_single_core():
    g = graph_from_edges(4, clique_edges(range(4)))
    assert [c.tolist() for c in brute_force_fcores(g, 1.0)] == [[0, 1, 2, 3]]


def test_two_triangles_two_cores():
    g = graph_from_edges(6, clique_edges(range(3)) + clique_edges(range(3, 6)))
    assert sorted(c.tolist() for c in brute_force_fcores(g, 0.9)) == [[0, 1, 2], [3, 4, 5]]


def test_refuses_large_graphs():
    g = graph_from_edges(BRUTE_FORCE_LIMIT + 1, [(0, 1)])
    with pytest.raises(ValueError):
        brute_force_fcores(g, 0.5)


@pytest.mark.parametrize("seed", range(20))
def test_oracle_matches_subset_enumeration(seed):
    g, adj, _ = _random_graph(500 + seed, n=10, p=0.45)
    got = {frozenset(c.tolist()) for c in brute_force_fcores(g, 0.5)}
    assert got == set(_enumerate_maximal(adj, 0.5))


def test_feasible_table_matches_direct_check():
    g, adj, _ = _random_graph(77, n=9, p=0.5)
    table = feasible_masks(g, 0.6)
    for mask in range(1 << g.n):
        s = {v for v in range(g.n) if mask >> v & 1}
        assert table[mask] == oracles.fcore_feasible(adj, s, 0.6)
