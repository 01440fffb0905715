import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandgrove import (
    InvalidDistribution,
    TooLarge,
    UnknownVertex,
    UnstableInput,
    add_and_stabilize,
    avalanche,
    build_box,
    build_graph,
    build_tree_ball,
    burning_run,
    check_group_action,
    enumerate_recurrent,
    is_allowed_bruteforce,
    is_stable,
    markov_step,
    stabilize,
)
from sandgrove.verify import ci_graphs, triangle

A, B = 0, 1


def test_single_vertex_topples_twice():
    G = build_graph([("v", "s", 2)])
    h, u = stabilize(G, [5])
    assert list(h) == [1] and list(u) == [2]


def test_chain():
    G = build_graph([("s", "v1", 1), ("v1", "v2", 1), ("v2", "s", 1)])
    h, u = stabilize(G, [2, 2])
    assert list(h) == [1, 1] and list(u) == [1, 1]


def test_stable_is_fixed():
    G = build_box([3, 3])
    eta = np.full(9, 3)
    h, u = stabilize(G, eta)
    assert np.array_equal(h, eta) and not u.any()


def test_triangle_addition_orbit():
    G = triangle()
    assert tuple(add_and_stabilize(G, (1, 1), A)) == (1, 0)
    assert tuple(add_and_stabilize(G, (1, 0), A)) == (0, 1)
    assert tuple(add_and_stabilize(G, (0, 1), A)) == (1, 1)


def test_addition_errors():
    G = triangle()
    with pytest.raises(UnknownVertex):
        add_and_stabilize(G, (1, 1), 5)
    with pytest.raises(UnstableInput):
        add_and_stabilize(G, (2, 0), A)


def test_policy_errors():
    with pytest.raises(ValueError):
        stabilize(triangle(), (3, 3), policy="sideways")


def test_markov_point_mass_and_errors():
    G = triangle()
    rng = np.random.default_rng(0)
    assert tuple(markov_step(G, (1, 1), [1 - 1e-12, 1e-12], rng)) in {(1, 0), (0, 1)}
    with pytest.raises(InvalidDistribution):
        markov_step(G, (1, 1), [1.0, 0.0], rng)
    with pytest.raises(InvalidDistribution):
        markov_step(G, (1, 1), [0.7, 0.7], rng)


def test_markov_reproducible():
    G = triangle()

    def run(seed):
        rng = np.random.default_rng(seed)
        eta, out = np.zeros(2, dtype=int), []
        for _ in range(30):
            eta = markov_step(G, eta, [0.5, 0.5], rng)
            out.append(tuple(eta))
        return out

    assert run(4) == run(4)


def test_markov_occupation_uniform():
    G = triangle()
    rng = np.random.default_rng(1)
    eta = np.zeros(2, dtype=int)
    counts = {}
    n = 30000
    for _ in range(n):
        eta = markov_step(G, eta, [0.5, 0.5], rng)
        counts[tuple(eta)] = counts.get(tuple(eta), 0) + 1
    assert set(counts) == {(0, 1), (1, 0), (1, 1)}
    for c in counts.values():
        assert abs(c / n - 1 / 3) < 0.02


def test_burning_examples():
    G = triangle()
    r = burning_run(G, (1, 1))
    assert r.allowed and [sorted(l) for l in r.layers] == [[A, B]]
    r = burning_run(G, (1, 0))
    assert r.allowed and r.layers == [[A], [B]]
    r = burning_run(G, (0, 0))
    assert not r.allowed and sorted(r.witness) == [A, B]
    with pytest.raises(UnstableInput):
        burning_run(G, (2, 0))


def test_bruteforce_oracle():
    G = triangle()
    assert not is_allowed_bruteforce(G, (0, 0))
    assert is_allowed_bruteforce(G, (1, 0))
    assert is_allowed_bruteforce(G, (1, 1))
    with pytest.raises(TooLarge):
        is_allowed_bruteforce(build_box([5, 5]), np.full(25, 3))


def test_enumerate_recurrent():
    assert enumerate_recurrent(triangle()) == [(0, 1), (1, 0), (1, 1)]
    assert enumerate_recurrent(build_graph([("v", "s", 2)])) == [(0,), (1,)]
    assert len(enumerate_recurrent(build_box([2, 2]))) == 192
    with pytest.raises(TooLarge):
        enumerate_recurrent(build_box([3, 3]), cap=100)


def test_group_action():
    rep = check_group_action(triangle())
    assert rep.ok and rep.group_order == 3 and rep.orders[A] == 3


def test_avalanche_record():
    G = build_tree_ball(3, 5)
    eta = G.deg - 1
    h, rec = avalanche(G, eta, G.index(()))
    assert is_stable(G, h)
    assert 0 < rec.distinct_sites <= G.n_vertices
    assert rec.topplings >= rec.distinct_sites and rec.lost > 0


def _graph_and_config():
    names = sorted(ci_graphs())

    @st.composite
    def strat(draw):
        G = ci_graphs()[draw(st.sampled_from(names))]
        eta = draw(st.lists(st.integers(0, 12), min_size=G.n_vertices, max_size=G.n_vertices))
        x = draw(st.integers(0, G.n_vertices - 1))
        y = draw(st.integers(0, G.n_vertices - 1))
        return G, np.array(eta), x, y

    return strat()


@settings(max_examples=60, deadline=None)
@given(_graph_and_config())
def test_abelian_property(case):
    G, eta, x, y = case
    h, _ = stabilize(G, eta)
    assert np.array_equal(
        add_and_stabilize(G, add_and_stabilize(G, h, x), y),
        add_and_stabilize(G, add_and_stabilize(G, h, y), x),
    )


@settings(max_examples=60, deadline=None)
@given(_graph_and_config(), st.integers(0, 2**31))
def test_policies_agree_and_conserve(case, seed):
    G, eta, _, _ = case
    h, u = stabilize(G, eta)
    h2, u2 = stabilize(G, eta, policy="random", rng=np.random.default_rng(seed))
    assert np.array_equal(h, h2) and np.array_equal(u, u2)
    lost = sum(int(u[x]) * G.mult(x, G.sink) for x in range(G.n_vertices))
    assert int(eta.sum()) - int(h.sum()) == lost


@settings(max_examples=40, deadline=None)
@given(_graph_and_config())
def test_burning_matches_bruteforce(case):
    G, eta, _, _ = case
    eta = eta % G.deg
    assert burning_run(G, eta).allowed == is_allowed_bruteforce(G, eta)
