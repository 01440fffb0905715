from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandgrove import (
    EmptyPath,
    ExhaustionSpec,
    HorizonExceedsPath,
    NotNested,
    RecurrentFamily,
    WalkEngine,
    build_box,
    build_graph,
    build_wired,
    closed_neighborhood,
    count_loopfree,
    enumerate_spanning_trees,
    loop_erase,
    sample_wsf_truncated,
    wilson_coupled,
    wilson_finite,
)
from sandgrove.spanning import regular_tree_walk
from sandgrove.verify import ci_graphs


def test_loop_erase_examples():
    assert loop_erase("abc") == list("abc")
    assert loop_erase("abac") == list("ac")
    assert loop_erase("abcbd") == list("abd")
    with pytest.raises(EmptyPath):
        loop_erase([])


@settings(max_examples=200)
@given(st.lists(st.integers(0, 6), min_size=1, max_size=60))
def test_loop_erase_properties(path):
    out = loop_erase(path)
    assert len(set(out)) == len(out)
    assert out[0] == path[0] and out[-1] == path[-1]
    assert loop_erase(out) == out
    assert set(out) <= set(path)


def test_count_loopfree_examples():
    assert count_loopfree(list("abcd"), 3) == [0, 1, 2]
    assert count_loopfree(list("abacd"), 4) == [2, 3]
    with pytest.raises(HorizonExceedsPath):
        count_loopfree(list("ab"), 2)


@settings(max_examples=100)
@given(st.lists(st.integers(0, 5), min_size=2, max_size=40))
def test_count_loopfree_bruteforce(path):
    n = len(path) - 1
    expect = [j for j in range(n) if not set(path[: j + 1]) & set(path[j + 1 : n + 1])]
    assert count_loopfree(path, n) == expect


def test_loopfree_density_on_tree():
    dens = []
    for seed in range(100):
        path = regular_tree_walk(3, 10_000, np.random.default_rng(seed), words=False)
        dens.append(len(count_loopfree(path, 10_000)) / 10_000)
    assert min(dens) > 0.05


def test_tree_walk_ids_match_words():
    a = regular_tree_walk(4, 500, np.random.default_rng(2))
    b = regular_tree_walk(4, 500, np.random.default_rng(2), words=False)
    assert len(set(a)) == len(set(b))
    assert all((a[i] == a[j]) == (b[i] == b[j]) for i in range(0, 500, 7) for j in range(0, 500, 11))


def test_tree_graph_is_deterministic():
    G = build_graph([("a", "b", 1), ("b", "c", 1), ("c", "s", 1)])
    trees = {wilson_finite(G, WalkEngine(seed)) for seed in range(10)}
    assert len(trees) == 1


@pytest.mark.parametrize("name", ["box2x2", "k4_sink", "multigraph"])
def test_wilson_uniform(name):
    G = ci_graphs()[name]
    trees = enumerate_spanning_trees(G)
    n = 40 * len(trees)
    eng = WalkEngine(1)
    counts = Counter(wilson_finite(G, eng, sample=i) for i in range(n))
    assert set(counts) == set(trees)
    p = 1 / len(trees)
    se = np.sqrt(p * (1 - p) / n)
    assert max(abs(counts[t] / n - p) for t in trees) < 4.5 * se


def test_wilson_other_root_and_weights():
    G = ci_graphs()["triangle"]
    eng = WalkEngine(2, weights={(0, 1, 0): 4})
    t = wilson_finite(G, eng, root=0)
    t.validate(G)
    assert t.root == 0


def test_engine_streams_reproducible():
    a = WalkEngine(5).generator(3).random(4)
    b = WalkEngine(5).generator(3).random(4)
    c = WalkEngine(5, 1).generator(3).random(4)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_closed_neighborhood_order():
    G = build_box([5, 5])
    o = G.index((0, 0))
    nb = closed_neighborhood(G, [o])
    assert nb[0] == o and len(nb) == 5


def test_coupling_identical_graphs_agree():
    G = build_wired(ExhaustionSpec.zd_box(2), 4)
    window = [G.label(i) for i in closed_neighborhood(G, [G.index((0, 0))])]
    for s in range(10):
        _, _, diag = wilson_coupled(G, G, window, WalkEngine(s))
        assert diag.agree


def test_coupling_not_nested():
    with pytest.raises(NotNested):
        wilson_coupled(build_box([7, 7]), build_box([5, 5]), [(0, 0)], WalkEngine(0))


def test_coupling_tree_balls():
    spec = ExhaustionSpec.tree_ball(3)
    Gn, Gm = build_wired(spec, 5), build_wired(spec, 10)
    window = [Gn.label(i) for i in closed_neighborhood(Gn, [Gn.index(())])]
    agree = np.mean([wilson_coupled(Gn, Gm, window, WalkEngine(s))[2].agree for s in range(50)])
    assert 0 <= agree <= 1


def test_truncated_wsf():
    with pytest.raises(RecurrentFamily):
        sample_wsf_truncated(ExhaustionSpec.zd_box(2), 5, [(0, 0)], WalkEngine(0))
    f = sample_wsf_truncated(ExhaustionSpec.tree_ball(3), 6, [()], WalkEngine(0))
    assert f.n_components == 1
    spec = ExhaustionSpec.zd_box(5)
    G = build_wired(spec, 4)
    window = [G.label(i) for i in closed_neighborhood(G, [G.index((0,) * 5)])]
    ks = [sample_wsf_truncated(spec, 4, window, WalkEngine(1), i, G=G).n_components for i in range(300)]
    assert max(ks) >= 2


def test_truncated_wsf_cutoff_consistency():
    spec = ExhaustionSpec.tree_ball(3)
    window = [(), (0,), (1,), (2,)]
    n = 4000

    def sig(R):
        G = build_wired(spec, R)
        return Counter(sample_wsf_truncated(spec, R, window, WalkEngine(R), i, G=G).window_signature() for i in range(n))

    a, b = sig(8), sig(14)
    from scipy.stats import chi2_contingency

    keys = sorted(set(a) | set(b), key=repr)
    table = np.array([[a[k] for k in keys], [b[k] for k in keys]])
    assert chi2_contingency(table).pvalue > 1e-3
