"""Bijection between recurrent configurations and spanning arborescences.

``config_to_tree`` follows the burning algorithm: a vertex burning at time
``i`` picks its tree edge among the edges into the layer burnt at ``i - 1``,
using its height.  ``tree_to_config`` inverts this from tree distances.  The
choice of edge for a given height is fixed by an :class:`AlphaConvention`.

Edges leaving a vertex ``x`` are written ``(head, parallel_index)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidTree, NotRecurrent, SizeMismatch
from .graphcore import Arborescence, SinkedMultigraph
from .sandpile import as_config, burning_run

__all__ = [
    "AlphaConvention",
    "CANONICAL",
    "alpha",
    "config_to_tree",
    "tree_to_config",
    "LocalData",
    "local_data",
    "NeighborhoodDescriptor",
    "neighborhood_descriptor",
    "height_from_descriptor",
    "reduced_data",
    "height_from_reduced",
    "height_from_depths",
]

Edge = tuple[int, int]


@dataclass(frozen=True)
class AlphaConvention:
    """Rule pairing an edge set ``P`` with a contiguous height range ``K``.

    ``rule`` is one of

    * ``"canonical"``: ``P`` sorted by ``(head, parallel_index)`` pairs with
      ``K`` ascending;
    * ``"reversed"``: the canonical order reversed;
    * ``"shuffled"``: a fixed pseudo-random order per ``(x, P)`` derived from
      ``seed``;
    * ``"table"``: explicit orders ``table[(x, tuple(sorted(P)))]``, canonical
      where no entry exists.
    """

    rule: str = "canonical"
    seed: int = 0
    table: Mapping[tuple[int, tuple[Edge, ...]], Sequence[Edge]] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.rule not in ("canonical", "reversed", "shuffled", "table"):
            raise ValueError(f"unknown alpha rule {self.rule!r}")

    def order(self, x: int, P: Sequence[Edge]) -> list[Edge]:
        """Edges of ``P`` in the order they receive ``K`` ascending."""
        base = sorted(tuple(e) for e in P)
        if self.rule == "canonical" or len(base) == 1:
            return base
        if self.rule == "reversed":
            return base[::-1]
        if self.rule == "shuffled":
            words = [self.seed, x] + [v for e in base for v in e]
            perm = np.random.default_rng(np.random.SeedSequence(words)).permutation(len(base))
            return [base[i] for i in perm]
        entry = (self.table or {}).get((x, tuple(base)))
        if entry is None:
            return base
        entry = [tuple(e) for e in entry]
        if sorted(entry) != base:
            raise SizeMismatch(f"alpha table entry for vertex {x} is not a permutation of P")
        return entry

    @property
    def is_canonical(self) -> bool:
        return self.rule == "canonical"


CANONICAL = AlphaConvention()


def alpha(
    P: Sequence[Edge], K: Sequence[int], convention: AlphaConvention = CANONICAL, x: int = -1
) -> dict[Edge, int]:
    """The bijection ``P -> K`` as a dictionary."""
    K = sorted(int(k) for k in K)
    if len(P) != len(K) or len(set(map(tuple, P))) != len(P):
        raise SizeMismatch(f"|P| = {len(P)} but |K| = {len(K)}")
    if not P:
        raise SizeMismatch("P must be nonempty")
    if K != list(range(K[0], K[0] + len(K))):
        raise SizeMismatch("K must be a contiguous integer range")
    return {e: k for e, k in zip(convention.order(x, P), K)}


def _edges_from(G: SinkedMultigraph, x: int, heads: Sequence[int]) -> list[Edge]:
    adj = G.adjacency()[x]
    return [(y, k) for y in heads for k in range(adj.get(y, 0))]


def height_from_depths(
    G: SinkedMultigraph,
    x: int,
    depth: Mapping[int, int] | Sequence[int],
    e_x: Edge,
    convention: AlphaConvention = CANONICAL,
) -> int:
    """Height at ``x`` given tree depths of ``x`` and its neighbours.

    Depths may be measured from any common reference point; only differences
    with ``depth[x]`` are used.
    """
    dx = depth[x]
    adj = G.adjacency()[x]
    n_below = sum(m for y, m in adj.items() if depth[y] < dx)
    P = _edges_from(G, x, sorted(y for y in adj if depth[y] == dx - 1))
    return height_from_reduced(G, x, n_below, P, e_x, convention)


def height_from_reduced(
    G: SinkedMultigraph,
    x: int,
    n_below: int,
    P: Sequence[Edge],
    e_x: Edge,
    convention: AlphaConvention = CANONICAL,
) -> int:
    """Height at ``x`` from the weight of lower neighbours, ``P`` and ``e_x``."""
    deg = int(G.deg[x])
    lo = deg - n_below
    table = alpha(list(P), range(lo, lo + len(P)), convention, x)
    try:
        return table[tuple(e_x)]
    except KeyError:
        raise InvalidTree(f"tree edge of {x} does not lead one level down") from None


# ---------------------------------------------------------------------------
# the two directions


def config_to_tree(
    G: SinkedMultigraph, eta: Sequence[int], convention: AlphaConvention = CANONICAL
) -> Arborescence:
    """Arborescence of a recurrent configuration."""
    h = as_config(G, eta)
    burn = burning_run(G, h)
    if not burn.allowed:
        raise NotRecurrent(f"configuration is not recurrent; forbidden set {burn.witness}")
    depth = [0] * (G.n_vertices + 1)
    layers = [[G.sink]] + burn.layers
    for i, layer in enumerate(layers):
        for v in layer:
            depth[v] = i
    parent: dict[int, tuple[int, int]] = {}
    adj = G.adjacency()
    for i in range(1, len(layers)):
        for x in layers[i]:
            n_below = sum(m for y, m in adj[x].items() if depth[y] < i)
            P = _edges_from(G, x, sorted(y for y in adj[x] if depth[y] == i - 1))
            lo = int(G.deg[x]) - n_below
            inverse = {k: e for e, k in alpha(P, range(lo, lo + len(P)), convention, x).items()}
            parent[x] = inverse[int(h[x])]
    return Arborescence.from_parent_map(G, parent)


def tree_to_config(
    G: SinkedMultigraph, t: Arborescence, convention: AlphaConvention = CANONICAL
) -> np.ndarray:
    """Recurrent configuration of a sink-rooted arborescence."""
    if t.root != G.sink:
        raise InvalidTree("arborescence must be rooted at the sink")
    t.validate(G)
    depth = t.depths()
    return np.array(
        [height_from_depths(G, x, depth, t.edge(x), convention) for x in range(G.n_vertices)],
        dtype=np.int64,
    )


# ---------------------------------------------------------------------------
# local data


@dataclass(frozen=True)
class LocalData:
    n: int
    P: tuple[Edge, ...]
    K: tuple[int, ...]
    e: Edge
    height: int


def local_data(
    G: SinkedMultigraph, t: Arborescence, x: int, convention: AlphaConvention = CANONICAL
) -> LocalData:
    depth = t.depths()
    dx = depth[x]
    adj = G.adjacency()[x]
    n = sum(m for y, m in adj.items() if depth[y] < dx)
    P = tuple(_edges_from(G, x, sorted(y for y in adj if depth[y] == dx - 1)))
    lo = int(G.deg[x]) - n
    K = tuple(range(lo, lo + len(P)))
    e = t.edge(x)
    return LocalData(n, P, K, e, alpha(P, K, convention, x)[e])


def reduced_data(G: SinkedMultigraph, t: Arborescence, x: int) -> tuple[int, frozenset[int], Edge]:
    """``(weight of strictly lower neighbours, neighbours one level down, e_x)``."""
    d = local_data(G, t, x)
    return d.n, frozenset(y for y, _ in d.P), d.e


@dataclass(frozen=True)
class NeighborhoodDescriptor:
    """Rooted subtree spanned by the tree paths from ``{x} + neighbours(x)``.

    ``parent`` maps each non-root vertex of the subtree to its tree edge;
    ``depth`` is the distance to ``root`` inside the subtree.
    """

    x: int
    root: int
    parent: Mapping[int, Edge]
    depth: Mapping[int, int]

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.depth)

    @property
    def edges(self) -> frozenset[tuple[int, int, int]]:
        return frozenset((v, y, k) for v, (y, k) in self.parent.items())


def _path(t: Arborescence, y: int) -> list[int]:
    path = [y]
    while t.heads[path[-1]] >= 0:
        path.append(t.heads[path[-1]])
    return path


def neighborhood_descriptor(G: SinkedMultigraph, t: Arborescence, x: int) -> NeighborhoodDescriptor:
    depth = t.depths()
    members = [x] + G.neighbors(x)
    paths = [_path(t, y) for y in members]
    common = set(paths[0]).intersection(*paths[1:])
    root = max(common, key=lambda v: depth[v])
    parent: dict[int, Edge] = {}
    fdepth: dict[int, int] = {root: 0}
    for path in paths:
        top = path.index(root)
        for i, v in enumerate(path[:top]):
            parent[v] = t.edge(v)
            fdepth[v] = top - i
    return NeighborhoodDescriptor(x, root, parent, fdepth)


def height_from_descriptor(
    G: SinkedMultigraph, desc: NeighborhoodDescriptor, convention: AlphaConvention = CANONICAL
) -> int:
    """Height at ``desc.x`` computed from the rooted subtree alone."""
    return height_from_depths(G, desc.x, desc.depth, desc.parent[desc.x], convention)
