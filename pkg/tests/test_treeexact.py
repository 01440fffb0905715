import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandgrove import CEqualsBoundary, InputError, InvalidDegree, WindowTooLarge
from sandgrove.treeexact import (
    boundary,
    build_auxiliary,
    build_weighted_auxiliary,
    escape_limit,
    escape_prob,
    exact_marginal,
    exact_marginal_finite,
    marginal_table,
    sym1_alternative,
    weighted_tree_sum,
    weighted_tree_sum_bruteforce,
)

O = ()


def test_escape_values():
    assert escape_prob(3, 1) == 1
    assert escape_prob(3, 2) == Fraction(2, 3)
    assert escape_limit(3) == Fraction(1, 2)
    assert escape_limit(5) == Fraction(3, 4)
    assert abs(float(escape_prob(3, 21)) - 0.5) < 1e-6
    with pytest.raises(InvalidDegree):
        escape_prob(2, 5)


def test_escape_monotone():
    vals = [escape_prob(4, n) for n in range(1, 15)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v > escape_limit(4) for v in vals)


def test_boundary():
    assert boundary(3, [O]) == [(0,), (1,), (2,)]
    assert len(boundary(3, [O, (0,)])) == 4


def test_window_must_be_connected():
    with pytest.raises(InputError):
        boundary(3, [O, (0, 1)])


def test_auxiliary_star():
    aux = build_auxiliary(3, [O], [], 2)
    G = aux.graph
    assert G.n_vertices == 1 + 3 + 3
    assert G.mult(G.index((0,)), G.index(("path", (0,), 1))) == 1
    assert G.deg[G.index(O)] == 3


def test_auxiliary_with_dangling_vertex():
    aux = build_auxiliary(3, [O], [(0,)], 1)
    G = aux.graph
    assert G.mult(G.index((0,)), G.sink) == 0
    assert G.mult(G.index((1,)), G.sink) == 1
    assert aux.config([2]) == [2, 0, 1, 1]


def test_full_boundary_rejected():
    with pytest.raises(CEqualsBoundary):
        build_auxiliary(3, [O], boundary(3, [O]))


@pytest.mark.parametrize("d", [3, 4])
def test_sym1_length_invariance(d):
    for h in range(d):
        for r in range(d):
            for C in itertools.combinations(boundary(d, [O]), r):
                assert sym1_alternative(d, [O], C, [h]).m_invariant


def test_sym1_zero_height_no_reentry():
    res = sym1_alternative(3, [O], [], [0])
    assert isinstance(res.case_b, bool)
    assert sym1_alternative(3, [O], [], [2]).case_b


def test_single_vertex_values():
    assert [exact_marginal(3, [O], (h,)) for h in range(3)] == [Fraction(1, 12), Fraction(1, 3), Fraction(7, 12)]
    assert [exact_marginal(4, [O], (h,)) for h in range(4)] == [
        Fraction(2, 27),
        Fraction(2, 9),
        Fraction(1, 3),
        Fraction(10, 27),
    ]


@pytest.mark.parametrize("d", [3, 4])
def test_normalization(d):
    assert sum(marginal_table(d, [O]).values()) == 1
    assert sum(marginal_table(d, [O], n=5).values()) == 1


def test_pair_window_normalizes_and_marginalizes():
    table = marginal_table(3, [O, (0,)])
    assert sum(table.values()) == 1
    for h in range(3):
        assert sum(v for k, v in table.items() if k[0] == h) == exact_marginal(3, [O], (h,))


def test_finite_convergence():
    for h in range(3):
        lim = exact_marginal(3, [O], (h,))
        far = exact_marginal_finite(3, [O], (h,), 20)
        near = exact_marginal_finite(3, [O], (h,), 2)
        assert abs(far - lim) < Fraction(1, 10_000)
        assert abs(far - lim) < abs(near - lim)


def test_window_too_large():
    with pytest.raises(WindowTooLarge):
        exact_marginal(4, [O, (0,), (1,), (2,)], (0, 0, 0, 0))


def test_unstable_height():
    with pytest.raises(InputError):
        exact_marginal(3, [O], (3,))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.fractions(Fraction(1, 10), Fraction(9, 10)), min_size=3, max_size=3))
def test_weighted_sum_matches_bruteforce(qs):
    W = build_weighted_auxiliary(3, [O], dict(zip(boundary(3, [O]), qs)))
    assert weighted_tree_sum(W.vertices, W.edges) == weighted_tree_sum_bruteforce(W.vertices, W.edges)


def test_weighted_aux_errors():
    with pytest.raises(InputError):
        build_weighted_auxiliary(3, [O], {(0,): Fraction(1, 2)})
