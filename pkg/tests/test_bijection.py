import pytest

from sandgrove import (
    AlphaConvention,
    Arborescence,
    InvalidTree,
    NotRecurrent,
    SizeMismatch,
    WalkEngine,
    alpha,
    build_box,
    build_graph,
    config_to_tree,
    enumerate_recurrent,
    enumerate_spanning_trees,
    local_data,
    neighborhood_descriptor,
    tree_to_config,
    wilson_finite,
)
from sandgrove.bijection import height_from_descriptor
from sandgrove.verify import ci_graphs, triangle

A, B, S = 0, 1, 2


def tri_tree(pa, pb):
    return Arborescence.from_parent_map(triangle(), {A: (pa, 0), B: (pb, 0)}, S)


def test_alpha_singleton():
    assert alpha([(S, 0)], [1]) == {(S, 0): 1}


def test_alpha_canonical_pair():
    assert alpha([(5, 0), (3, 0)], [3, 2]) == {(3, 0): 2, (5, 0): 3}


def test_alpha_errors():
    with pytest.raises(SizeMismatch):
        alpha([(1, 0), (2, 0)], [0, 1, 2])
    with pytest.raises(SizeMismatch):
        alpha([(1, 0), (2, 0)], [0, 2])


def test_alpha_table():
    conv = AlphaConvention("table", table={(0, ((1, 0), (2, 0))): [(2, 0), (1, 0)]})
    assert alpha([(1, 0), (2, 0)], [0, 1], conv, x=0) == {(2, 0): 0, (1, 0): 1}
    bad = AlphaConvention("table", table={(0, ((1, 0), (2, 0))): [(2, 0), (3, 0)]})
    with pytest.raises(SizeMismatch):
        alpha([(1, 0), (2, 0)], [0, 1], bad, x=0)


def test_alpha_rule_check():
    with pytest.raises(ValueError):
        AlphaConvention("sideways")


def test_triangle_forward():
    G = triangle()
    assert config_to_tree(G, (1, 1)) == tri_tree(S, S)
    assert config_to_tree(G, (1, 0)) == tri_tree(S, A)
    assert config_to_tree(G, (0, 1)) == tri_tree(B, S)


def test_triangle_backward():
    G = triangle()
    assert tuple(tree_to_config(G, tri_tree(S, S))) == (1, 1)
    assert tuple(tree_to_config(G, tri_tree(S, A))) == (1, 0)


def test_not_recurrent():
    with pytest.raises(NotRecurrent):
        config_to_tree(triangle(), (0, 0))


def test_invalid_tree():
    G = triangle()
    cyc = Arborescence((B, A, -1), (0, 0, 0), S)
    with pytest.raises(InvalidTree):
        tree_to_config(G, cyc)


def test_box_image_is_recurrent_set():
    G = build_box([2, 2])
    images = {tuple(tree_to_config(G, t)) for t in enumerate_spanning_trees(G)}
    assert len(images) == 192 and images == set(enumerate_recurrent(G))


def test_local_data_examples():
    G = triangle()
    t = tri_tree(S, A)
    da, db = local_data(G, t, A), local_data(G, t, B)
    assert (da.n, da.P, da.K) == (1, ((S, 0),), (1,))
    assert (db.n, db.P, db.K) == (2, ((A, 0),), (0,))
    assert local_data(G, tri_tree(S, S), A).K == (1,)


def test_descriptor_examples():
    G = triangle()
    d = neighborhood_descriptor(G, tri_tree(S, S), A)
    assert d.root == S and d.vertices == {A, B, S}
    assert d.edges == {(A, S, 0), (B, S, 0)}
    d = neighborhood_descriptor(G, tri_tree(S, A), B)
    assert d.root == S and d.edges == {(A, S, 0), (B, A, 0)}


def test_star_descriptor():
    G = build_graph([("a", "s", 1), ("b", "s", 1), ("c", "s", 1)])
    t = Arborescence.from_parent_map(G, {0: (3, 0), 1: (3, 0), 2: (3, 0)}, 3)
    for x in range(3):
        d = neighborhood_descriptor(G, t, x)
        assert d.root == G.sink and d.edges == {(x, G.sink, 0)}


def test_multigraph_parallel_edges_distinct():
    G = ci_graphs()["multigraph"]
    trees = enumerate_spanning_trees(G)
    assert len({tuple(tree_to_config(G, t)) for t in trees}) == len(trees)


@pytest.mark.parametrize("rule", ["reversed", "shuffled"])
def test_alternative_conventions_roundtrip(rule):
    conv = AlphaConvention(rule, seed=3)
    G = ci_graphs()["box2x3"]
    for eta in enumerate_recurrent(G)[:400]:
        assert tuple(tree_to_config(G, config_to_tree(G, eta, conv), conv)) == eta


def test_locality_on_sampled_box_trees():
    G = build_box([6, 6])
    eng = WalkEngine(9)
    for i in range(40):
        t = wilson_finite(G, eng, sample=i)
        eta = tree_to_config(G, t)
        assert all(height_from_descriptor(G, neighborhood_descriptor(G, t, x)) == eta[x] for x in range(G.n_vertices))
