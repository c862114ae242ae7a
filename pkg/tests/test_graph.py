from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import graph_from_edges
from overlapcomm.graph import (
    EdgeListError,
    Graph,
    ego_subgraph,
    load_cache,
    load_edge_list,
    load_graph,
    local_clustering,
    save_cache,
    stats,
    write_edge_list,
)


def _edges(g: Graph) -> set[tuple[int, int]]:
    u, v = g.edges()
    return {(int(a), int(b)) for a, b in zip(g.labels[u], g.labels[v])}


def test_triangle_edge_list():
    g = load_edge_list(b"1 2\n2 3\n1 3")
    assert (g.n, g.m) == (3, 3)


def test_duplicates_and_self_loops_dropped():
    g = load_edge_list(b"1 2\n2 1\n1 1")
    assert (g.n, g.m) == (2, 1)


def test_mutual_only_keeps_reciprocated_pairs():
    g = load_edge_list(b"1 2\n2 1\n1 3", mutual_only=True)
    assert _edges(g) == {(1, 2)}


def test_comments_and_blank_lines_ignored():
    g = load_edge_list(b"# header\n\n10 20\n# mid\n20 30\n")
    assert g.labels.tolist() == [10, 20, 30]
    assert _edges(g) == {(10, 20), (20, 30)}


def test_empty_input_gives_empty_graph():
    g = load_edge_list(b"")
    assert (g.n, g.m) == (0, 0)
    assert stats(g).n == 0


def test_malformed_line_reports_line_number():
    with pytest.raises(EdgeListError) as err:
        load_edge_list(b"1 2\n3 x\n")
    assert "2" in str(err.value)


def test_single_token_line_is_malformed():
    with pytest.raises(EdgeListError):
        load_edge_list(b"1 2\n3\n")


def test_reported_mean_degree_identity():
    # Weibo-scale figures: 79.4 M vertices, 1046 M edges, mean degree 26.4, each
    # rounded; the interval of 2m/n over the rounding cells must meet [26.35, 26.45)
    lo = 2 * 1045.5e6 / 79.45e6
    hi = 2 * 1046.5e6 / 79.35e6
    assert lo < 26.45 and hi >= 26.35
    g = Graph.from_edges(4, np.array([0, 1, 2]), np.array([1, 2, 3]))
    assert stats(g).mean_degree == 2 * g.m / g.n


def test_triangle_clustering_is_one():
    assert stats(load_edge_list(b"1 2\n2 3\n1 3")).mean_local_clustering == 1.0


def test_path_clustering_is_zero():
    s = stats(load_edge_list(b"1 2\n2 3"))
    assert s.mean_local_clustering == 0.0
    assert s.mean_degree == pytest.approx(4 / 3)


def test_ego_of_k5_center_is_k4():
    g = graph_from_edges(5, oracles.combinations(range(5), 2))
    ego = ego_subgraph(g, 0)
    assert ego.graph.n == 4 and ego.graph.m == 6
    assert ego.local_to_global.tolist() == [1, 2, 3, 4]


def test_ego_of_articulation_vertex_is_two_edges():
    g = graph_from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (2, 4)])
    ego = ego_subgraph(g, 2)
    got = {(ego.global_id(a), ego.global_id(b)) for a, b in zip(*ego.graph.edges())}
    assert got == {(0, 1), (3, 4)}


def test_ego_out_of_range():
    g = graph_from_edges(3, [(0, 1)])
    with pytest.raises(IndexError):
        ego_subgraph(g, 3)


@pytest.mark.parametrize("seed", range(5))
def test_ego_edges_match_direct_filter(seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(30, 1)
    keep = rng.random(len(iu)) < 0.25
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    g = graph_from_edges(30, edges)
    adj = oracles.adjacency(30, edges)
    for v in range(30):
        ego = ego_subgraph(g, v)
        got = {(ego.global_id(a), ego.global_id(b)) for a, b in zip(*ego.graph.edges())}
        assert got == oracles.ego_edges(adj, v)


@pytest.mark.parametrize("seed", range(5))
def test_clustering_matches_triangle_count(seed):
    rng = np.random.default_rng(100 + seed)
    n = int(rng.integers(20, 101))
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < 0.15
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    got = local_clustering(graph_from_edges(n, edges))
    np.testing.assert_allclose(got, oracles.clustering(oracles.adjacency(n, edges)), atol=1e-12)


edge_lists = st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), max_size=120)


def _text(pairs) -> bytes:
    return "".join(f"{a} {b}\n" for a, b in pairs).encode()


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_graph_invariants(pairs):
    g = load_edge_list(_text(pairs))
    for v in range(g.n):
        nb = g.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        assert v not in nb
        for w in nb.tolist():
            assert g.has_edge(w, v)
    assert 2 * g.m == int(g.degree().sum())


@settings(max_examples=60, deadline=None)
@given(edge_lists)
def test_edge_list_round_trip(pairs):
    g = load_edge_list(_text(pairs))
    buf = io.BytesIO()
    write_edge_list(g, buf, header="round trip")
    again = load_edge_list(buf.getvalue())
    # vertices whose every line was a self-loop vanish from a written edge list
    assert _edges(again) == _edges(g)
    if g.degree().min(initial=1) > 0:
        assert again == g


@settings(max_examples=60, deadline=None)
@given(edge_lists, st.randoms(use_true_random=False))
def test_load_is_order_insensitive(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    assert load_edge_list(_text(shuffled)) == load_edge_list(_text(pairs))


def test_binary_cache_round_trip(tmp_path):
    g = load_edge_list(b"5 9\n9 12\n12 5\n12 40\n")
    path = tmp_path / "g.ovc"
    save_cache(g, path)
    assert load_cache(path) == g
    assert load_graph(path) == g


def test_cache_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.ovc"
    path.write_bytes(b"not a cache at all")
    with pytest.raises(ValueError):
        load_cache(path)


def test_isolated_vertex_retained():
    g = load_edge_list(b"1 2\n3 3\n")
    assert g.n == 3 and g.degree(2) == 0
