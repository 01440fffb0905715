"""Exact height probabilities on the d-regular tree.

Vertices of the tree are words (see :func:`sandgrove.graphcore.build_tree_ball`):
``()`` is the root ``o``, ``(b,)`` with ``b < d`` its children, and deeper
vertices append letters ``< d - 1``.  A window ``A`` is a finite connected set
of words containing ``o``; ``boundary(A)`` is its outer vertex boundary.

The marginal of the heights on ``A`` is a finite sum over subsets ``C`` of the
boundary (the boundary vertices whose tree path re-enters ``A``).  For each
``C`` the height pattern ``h`` either admits no tree at all or forces a unique
choice of tree edges inside ``A``, decided by burning a small auxiliary
configuration.  Every admissible ``(C, h)`` contributes the product of the
weights ``q / (1 - q)`` over the boundary vertices outside ``C``, where ``q``
is the probability that a walk from that vertex escapes to the far boundary
before touching ``A``.  All arithmetic is exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .bijection import config_to_tree
from .errors import CEqualsBoundary, InputError, InvalidDegree, WindowTooLarge
from .graphcore import SinkedMultigraph, build_graph
from .sandpile import burning_run

__all__ = [
    "escape_prob",
    "escape_limit",
    "boundary",
    "AuxiliaryGraph",
    "build_auxiliary",
    "Sym1Result",
    "sym1_alternative",
    "WeightedAuxiliaryGraph",
    "build_weighted_auxiliary",
    "weighted_tree_sum",
    "weighted_tree_sum_bruteforce",
    "exact_marginal",
    "exact_marginal_finite",
    "marginal_table",
]

Word = tuple[int, ...]
MAX_WINDOW = 12


def _check_degree(d: int) -> None:
    if not isinstance(d, int) or d < 3:
        raise InvalidDegree(f"tree degree must be an integer >= 3, got {d!r}")


def escape_prob(d: int, n: int) -> Fraction:
    """Probability that a walk started one step away from ``o`` reaches
    distance ``n`` from ``o`` before visiting ``o``."""
    _check_degree(d)
    if n < 1:
        raise InputError("depth must be >= 1")
    r = Fraction(1, d - 1)
    return (1 - r) / (1 - r**n)


def escape_limit(d: int) -> Fraction:
    _check_degree(d)
    return Fraction(d - 2, d - 1)


# ---------------------------------------------------------------------------
# tree words


def _neighbors(d: int, w: Word) -> list[Word]:
    if not w:
        return [(b,) for b in range(d)]
    return [w[:-1]] + [w + (c,) for c in range(d - 1)]


def _check_window(d: int, A: Iterable[Sequence[int]]) -> list[Word]:
    _check_degree(d)
    A = sorted({tuple(int(c) for c in w) for w in A}, key=lambda w: (len(w), w))
    if () not in A:
        raise InputError("window must contain the root ()")
    for w in A:
        if w and (w[0] >= d or any(c >= d - 1 for c in w[1:]) or min(w) < 0):
            raise InputError(f"{w} is not a vertex of the {d}-regular tree")
        if w and w[:-1] not in A:
            raise InputError("window must be connected")
    return A


def boundary(d: int, A: Iterable[Sequence[int]]) -> list[Word]:
    A = _check_window(d, A)
    inside = set(A)
    out = {v for w in A for v in _neighbors(d, w) if v not in inside}
    return sorted(out, key=lambda w: (len(w), w))


def _tree_edges(d: int, A: Sequence[Word], dA: Sequence[Word]) -> list[tuple[Word, Word]]:
    inside = set(A)
    return [(w, v) for w in A for v in _neighbors(d, w) if v in inside and w < v] + [
        (v[:-1], v) for v in dA
    ]


# ---------------------------------------------------------------------------
# auxiliary graphs


@dataclass
class AuxiliaryGraph:
    """Window, its boundary, and paths to a common sink glued at ``boundary \\ C``.

    ``config(h)`` is the reference configuration: ``h`` on the window, 0 on
    ``C`` and 1 on every other vertex.
    """

    graph: SinkedMultigraph
    window: list[Word]
    boundary: list[Word]
    C: frozenset
    path_lengths: dict[Word, int]

    def config(self, h: Mapping[Word, int] | Sequence[int]) -> list[int]:
        if not isinstance(h, Mapping):
            h = dict(zip(self.window, h))
        G = self.graph
        out = []
        for i in range(G.n_vertices):
            lab = G.label(i)
            if lab in h:
                out.append(int(h[lab]))
            elif lab in self.C:
                out.append(0)
            else:
                out.append(1)
        return out


def _h_dict(A: Sequence[Word], h) -> dict[Word, int]:
    if isinstance(h, Mapping):
        h = {tuple(k): int(v) for k, v in h.items()}
        if set(h) != set(A):
            raise InputError("h must assign a height to every window vertex")
        return h
    h = list(h)
    if len(h) != len(A):
        raise InputError(f"h has {len(h)} entries for a window of {len(A)} vertices")
    return dict(zip(A, map(int, h)))


def build_auxiliary(
    d: int,
    A: Iterable[Sequence[int]],
    C: Iterable[Sequence[int]],
    path_lengths: int | Mapping[Word, int] = 1,
) -> AuxiliaryGraph:
    A = _check_window(d, A)
    dA = boundary(d, A)
    C = frozenset(tuple(c) for c in C)
    if not C <= set(dA):
        raise InputError("C must be a subset of the window boundary")
    if C == set(dA):
        raise CEqualsBoundary("C must be a proper subset of the boundary")
    free = [y for y in dA if y not in C]
    if isinstance(path_lengths, int):
        m = {y: path_lengths for y in free}
    else:
        m = {tuple(y): int(v) for y, v in path_lengths.items() if tuple(y) in set(free)}
        if set(m) != set(free):
            raise InputError("need a path length for every boundary vertex outside C")
    if min(m.values()) < 1:
        raise InputError("path lengths must be >= 1")
    edges = [(u, v, 1) for u, v in _tree_edges(d, A, dA)]
    vertices: list = list(A) + list(dA)
    for y in free:
        chain = [y] + [("path", y, i) for i in range(1, m[y])] + ["s"]
        vertices.extend(chain[1:-1])
        edges.extend((a, b, 1) for a, b in zip(chain, chain[1:]))
    G = build_graph(edges, "s", vertices)
    return AuxiliaryGraph(G, A, dA, C, m)


@dataclass
class Sym1Result:
    """``case_b`` is True when the reference configuration is recurrent;
    ``arrows`` then maps each window vertex to the neighbour its tree edge
    points to."""

    case_b: bool
    arrows: dict[Word, Word] | None
    m_invariant: bool


def _length_choices(free: Sequence[Word], exhaustive_limit: int = 4) -> list[dict[Word, int]]:
    if len(free) <= exhaustive_limit:
        return [dict(zip(free, combo)) for combo in itertools.product((1, 2, 3), repeat=len(free))]
    out = [{y: m for y in free} for m in (1, 2, 3)]
    for shift in range(3):
        out.append({y: 1 + (i + shift) % 3 for i, y in enumerate(free)})
    return out


def _verdict(aux: AuxiliaryGraph, h: Mapping[Word, int]) -> tuple[bool, dict[Word, Word] | None]:
    eta = aux.config(h)
    G = aux.graph
    if not burning_run(G, eta).allowed:
        return False, None
    t = config_to_tree(G, eta)
    arrows = {G.label(G.index(w)): G.label(t.heads[G.index(w)]) for w in aux.window}
    return True, arrows


def sym1_alternative(
    d: int,
    A: Iterable[Sequence[int]],
    C: Iterable[Sequence[int]],
    h: Mapping[Word, int] | Sequence[int],
    check_lengths: bool = True,
) -> Sym1Result:
    """Decide whether the pattern ``h`` with re-entry set ``C`` is admissible.

    The verdict and the forced arrows are computed with unit path lengths.
    When ``check_lengths`` is set the verdict is recomputed for path lengths
    in ``{1, 2, 3}`` (all combinations for up to four glued paths) to confirm
    it does not depend on them.  The arrows do move with the lengths, since
    the canonical edge order follows burn times.
    """
    aux = build_auxiliary(d, A, C, 1)
    hd = _h_dict(aux.window, h)
    for w in aux.window:
        deg = d
        if not 0 <= hd[w] < deg:
            raise InputError(f"height {hd[w]} at {w} is not stable")
    verdict, arrows = _verdict(aux, hd)
    invariant = True
    if check_lengths:
        free = [y for y in aux.boundary if y not in aux.C]
        for m in _length_choices(free):
            if all(v == 1 for v in m.values()):
                continue
            if _verdict(build_auxiliary(d, aux.window, aux.C, m), hd)[0] != verdict:
                invariant = False
                break
    return Sym1Result(verdict, arrows, invariant)


# ---------------------------------------------------------------------------
# weighted spanning-tree sums


@dataclass
class WeightedAuxiliaryGraph:
    """Window plus boundary, each boundary vertex tied to the sink by one edge.

    ``edges`` lists ``(u, v, weight)`` with ``"s"`` as the sink; internal
    edges have weight 1 and the edge of boundary vertex ``y`` has weight
    ``q_y / (1 - q_y)``.
    """

    window: list[Word]
    boundary: list[Word]
    q: dict[Word, Fraction]
    edges: list[tuple]

    @property
    def vertices(self) -> list:
        return list(self.window) + list(self.boundary)

    def weight(self, y: Word) -> Fraction:
        return self.q[y] / (1 - self.q[y])


def build_weighted_auxiliary(d: int, A: Iterable[Sequence[int]], q: Mapping[Word, Fraction]) -> WeightedAuxiliaryGraph:
    A = _check_window(d, A)
    dA = boundary(d, A)
    q = {tuple(y): Fraction(v) for y, v in q.items()}
    for y in dA:
        if y not in q or not 0 < q[y] < 1:
            raise InputError(f"need an escape probability strictly between 0 and 1 at {y}")
    edges: list[tuple] = [(u, v, Fraction(1)) for u, v in _tree_edges(d, A, dA)]
    edges.extend((y, "s", q[y] / (1 - q[y])) for y in dA)
    return WeightedAuxiliaryGraph(A, dA, {y: q[y] for y in dA}, edges)


def _fraction_det(M: list[list[Fraction]]) -> Fraction:
    M = [row[:] for row in M]
    n = len(M)
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if M[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            M[k], M[piv] = M[piv], M[k]
            det = -det
        det *= M[k][k]
        for i in range(k + 1, n):
            if M[i][k] != 0:
                f = M[i][k] / M[k][k]
                for j in range(k, n):
                    M[i][j] -= f * M[k][j]
    return det


def weighted_tree_sum(vertices: Sequence, edges: Sequence[tuple], sink="s") -> Fraction:
    """Sum over spanning trees of the product of edge weights (matrix-tree)."""
    index = {v: i for i, v in enumerate(vertices)}
    n = len(vertices)
    L = [[Fraction(0)] * n for _ in range(n)]
    for u, v, w in edges:
        w = Fraction(w)
        for a, b in ((u, v), (v, u)):
            if a == sink:
                continue
            L[index[a]][index[a]] += w
            if b != sink:
                L[index[a]][index[b]] -= w
    return _fraction_det(L)


def weighted_tree_sum_bruteforce(vertices: Sequence, edges: Sequence[tuple], sink="s", max_vertices: int = 9) -> Fraction:
    """Same sum by checking every edge subset of the right size."""
    allv = list(vertices) + [sink]
    if len(allv) > max_vertices + 1:
        raise WindowTooLarge(f"brute-force enumeration limited to {max_vertices} vertices")
    total = Fraction(0)
    need = len(allv) - 1
    for subset in itertools.combinations(range(len(edges)), need):
        parent = {v: v for v in allv}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        ok = True
        weight = Fraction(1)
        for i in subset:
            u, v, w = edges[i]
            ru, rv = find(u), find(v)
            if ru == rv:
                ok = False
                break
            parent[ru] = rv
            weight *= Fraction(w)
        if ok:
            total += weight
    return total


# ---------------------------------------------------------------------------
# marginals


def _q_limit(d: int, dA: Sequence[Word]) -> dict[Word, Fraction]:
    q = escape_limit(d)
    return {y: q for y in dA}


def _q_finite(d: int, dA: Sequence[Word], n: int) -> dict[Word, Fraction]:
    top = max(len(y) for y in dA)
    if n < top + 1:
        raise InputError(f"depth {n} too small: the window boundary reaches level {top}")
    return {y: escape_prob(d, n - len(y) + 1) for y in dA}


def _admissible_sets(d: int, A: list[Word], dA: list[Word], h: dict[Word, int]) -> list[frozenset]:
    out = []
    for r in range(len(dA)):
        for C in itertools.combinations(dA, r):
            if sym1_alternative(d, A, C, h, check_lengths=False).case_b:
                out.append(frozenset(C))
    return out


def _marginal(d: int, A, h, q_fn) -> Fraction:
    A = _check_window(d, A)
    dA = boundary(d, A)
    if len(A) + len(dA) > MAX_WINDOW:
        raise WindowTooLarge(f"|A| + |boundary| = {len(A) + len(dA)} exceeds {MAX_WINDOW}")
    hd = _h_dict(A, h)
    for w in A:
        if not 0 <= hd[w] < d:
            raise InputError(f"height {hd[w]} at {w} is not stable")
    q = q_fn(d, dA)
    W = build_weighted_auxiliary(d, A, q)
    Z = weighted_tree_sum(W.vertices, W.edges)
    total = Fraction(0)
    for C in _admissible_sets(d, A, dA, hd):
        term = Fraction(1)
        for y in dA:
            if y not in C:
                term *= W.weight(y)
        total += term
    return total / Z


def exact_marginal(d: int, A: Iterable[Sequence[int]], h) -> Fraction:
    """``P[heights on A equal h]`` under the infinite-volume limit measure."""
    return _marginal(d, A, h, _q_limit)


def exact_marginal_finite(d: int, A: Iterable[Sequence[int]], h, n: int) -> Fraction:
    """Same probability on the wired ball ``{|v| <= n - 1}``."""
    return _marginal(d, A, h, lambda d_, dA: _q_finite(d_, dA, n))


def marginal_table(d: int, A: Iterable[Sequence[int]], n: int | None = None) -> dict[tuple[int, ...], Fraction]:
    """Probabilities of every stable pattern on ``A`` (window in sorted order)."""
    A = _check_window(d, A)
    out = {}
    for h in itertools.product(range(d), repeat=len(A)):
        out[h] = exact_marginal(d, A, h) if n is None else exact_marginal_finite(d, A, h, n)
    return out
