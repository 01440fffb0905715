"""Loop erasure, Wilson's algorithm and coupled sampling across volumes.

Randomness comes from :class:`WalkEngine`, which hands out independent
``numpy`` generators keyed by ``(seed, stream, *subkeys)``.  Samplers that
need to reproduce the same walk in two graphs derive one generator per walk.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import EmptyPath, HorizonExceedsPath, InputError, NotNested, RecurrentFamily
from .graphcore import Arborescence, ExhaustionSpec, SinkedMultigraph, build_wired, embed_indices

__all__ = [
    "WalkEngine",
    "loop_erase",
    "wilson_finite",
    "wilson_sink",
    "closed_neighborhood",
    "CouplingDiagnostics",
    "wilson_coupled",
    "TruncatedForest",
    "sample_wsf_truncated",
    "count_loopfree",
    "regular_tree_walk",
]


@dataclass(frozen=True)
class WalkEngine:
    """Source of reproducible, independent random streams.

    ``weights`` (optional) maps undirected edges ``(min, max, k)`` to positive
    weights; walks then step along an edge with probability proportional to
    its weight.  Unlisted edges have weight 1.
    """

    seed: int
    stream: int = 0
    weights: Mapping[tuple[int, int, int], Fraction | float] | None = field(default=None, compare=False)

    def generator(self, *subkeys: int) -> np.random.Generator:
        key = (int(self.stream),) + tuple(int(k) for k in subkeys)
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(self.seed), spawn_key=key)))

    def child(self, stream: int) -> "WalkEngine":
        return WalkEngine(self.seed, stream, self.weights)


def loop_erase(path: Sequence[Hashable]) -> list[Hashable]:
    """Chronological loop erasure.

    Uses the last-exit description: after reaching ``v`` the erased path
    continues from the step following the last visit to ``v``.
    """
    if len(path) == 0:
        raise EmptyPath("cannot loop-erase an empty path")
    last = {v: k for k, v in enumerate(path)}
    out = [path[0]]
    k = last[path[0]]
    while k < len(path) - 1:
        v = path[k + 1]
        out.append(v)
        k = last[v]
    return out


# ---------------------------------------------------------------------------
# Wilson's algorithm


def _full_adjacency(G: SinkedMultigraph) -> list[list[tuple[int, int]]]:
    """Per-vertex list of ``(neighbour, parallel_index)`` over ``V + {s}``."""
    out: list[list[tuple[int, int]]] = [[] for _ in range(G.n_vertices + 1)]
    par = G.parallel_index()
    for x in range(G.n_vertices):
        for p in range(G.ptr[x], G.ptr[x + 1]):
            y = int(G.ports[p])
            out[x].append((y, int(par[p])))
            if y == G.sink:
                out[y].append((x, int(par[p])))
    return out


def wilson_sink(G: SinkedMultigraph, rng: np.random.Generator, order: Sequence[int] | None = None) -> np.ndarray:
    """Uniform spanning tree rooted at the sink, as one parent port per vertex.

    Compiled path for unweighted walks; returns the ``parent_port`` array
    (length ``n_vertices + 1``, last entry unused).
    """
    n = G.n_vertices
    order_arr = np.arange(n, dtype=np.int64) if order is None else np.asarray(order, dtype=np.int64)
    in_tree = np.zeros(n + 1, dtype=np.bool_)
    in_tree[n] = True
    parent_port = np.full(n + 1, -1, dtype=np.int64)
    _kernels.wilson_all(G.ptr, G.ports, order_arr, rng, in_tree, parent_port)
    return parent_port


def wilson_finite(
    G: SinkedMultigraph,
    engine: WalkEngine,
    root: int | None = None,
    order: Sequence[int] | None = None,
    sample: int = 0,
) -> Arborescence:
    """One spanning tree of ``G`` oriented toward ``root`` (default: the sink).

    ``order`` enumerates the vertices from which walks start (default: index
    order); the law of the output does not depend on it.  Each ``sample`` index
    gives an independent draw.
    """
    root = G.sink if root is None else int(root)
    if not 0 <= root <= G.sink:
        raise InputError(f"root {root} out of range")
    rng = engine.generator(sample)
    if root == G.sink and engine.weights is None:
        if order is not None:
            order = [v for v in order if v != G.sink]
        return G.arborescence_from_ports(wilson_sink(G, rng, order))
    adj = _full_adjacency(G)
    if order is None:
        order = range(G.n_vertices + 1)
    cum: list[np.ndarray | None] = []
    for x, row in enumerate(adj):
        if engine.weights is None:
            cum.append(None)
            continue
        w = [float(engine.weights.get((min(x, y), max(x, y), k), 1)) for y, k in row]
        cum.append(np.cumsum(w) / sum(w))
    in_tree = [False] * (G.n_vertices + 1)
    in_tree[root] = True
    nxt: list[tuple[int, int] | None] = [None] * (G.n_vertices + 1)
    for start in order:
        u = start
        while not in_tree[u]:
            c = cum[u]
            j = int(rng.integers(len(adj[u]))) if c is None else min(int(np.searchsorted(c, rng.random(), "right")), len(c) - 1)
            nxt[u] = adj[u][j]
            u = nxt[u][0]
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            u = nxt[u][0]
    parent = {x: nxt[x] for x in range(G.n_vertices + 1) if x != root}
    return Arborescence.from_parent_map(G, parent, root)


def closed_neighborhood(G: SinkedMultigraph, window: Sequence[int]) -> list[int]:
    """Window vertices followed by their other non-sink neighbours.

    Order: each window vertex, then its neighbours in port order, skipping
    repeats and the sink.
    """
    out: list[int] = []
    seen: set[int] = set()
    for x in window:
        for y in [x] + [int(v) for v in G.port_slice(x)]:
            if y != G.sink and y not in seen:
                seen.add(y)
                out.append(y)
    return out


# ---------------------------------------------------------------------------
# coupling across nested volumes


@dataclass
class CouplingDiagnostics:
    """Outcome of one coupled draw on ``(G_n, G_m)``.

    ``per_edge`` gives, for each start vertex (by label), whether its tree
    edge agrees in both graphs; ``None`` when the edge leads to the sink of
    ``G_n`` and so does not exist in ``G_m``.  ``exit_times[j]`` is the first
    step at which walk ``j`` of the larger graph leaves ``V_n`` (``None`` if it
    stops before), ``hit_times`` the walk lengths in each graph.
    """

    seed: int
    sample: int
    window: list
    agree: bool
    heights_n: list[int]
    heights_m: list[int]
    per_edge: dict
    exit_times: list[int | None]
    hit_times_n: list[int]
    hit_times_m: list[int]

    def to_dict(self, radii: Sequence[int] | None = None) -> dict:
        return {
            "seed": self.seed,
            "sample": self.sample,
            "radii": list(radii) if radii is not None else None,
            "window": [_jsonable(v) for v in self.window],
            "agree": self.agree,
            "per_edge": [[_jsonable(k), v] for k, v in self.per_edge.items()],
            "exit_times": self.exit_times,
        }


def _jsonable(v):
    return list(v) if isinstance(v, tuple) else v


def _check_nested(G_n: SinkedMultigraph, G_m: SinkedMultigraph) -> np.ndarray:
    if G_n.family != G_m.family:
        raise NotNested("graphs come from different exhaustion families")
    try:
        emb = embed_indices(G_n, G_m)
    except InputError as exc:
        raise NotNested(str(exc)) from None
    # the lattice port order must coincide for the walks to be shared
    for x in range(G_n.n_vertices):
        a = G_n.port_slice(x)
        b = G_m.port_slice(int(emb[x]))
        if len(a) != len(b):
            raise NotNested("degrees differ between the volumes")
        inner = a != G_n.sink
        if not np.array_equal(emb[a[inner]], b[inner]):
            raise NotNested("port structure differs between the volumes")
    return emb


class _LocalState:
    """Scratch arrays for repeated partial Wilson runs on one graph."""

    def __init__(self, G: SinkedMultigraph):
        n = G.n_vertices
        self.G = G
        self.in_tree = np.zeros(n + 1, dtype=np.bool_)
        self.in_tree[n] = True
        self.parent_port = np.full(n + 1, -1, dtype=np.int64)
        self.depth = np.full(n + 1, -1, dtype=np.int64)
        self.depth[n] = 0
        self.added = np.empty(n, dtype=np.int64)

    def reset(self, n_added: int) -> None:
        idx = self.added[:n_added]
        self.in_tree[idx] = False
        self.depth[idx] = -1


def wilson_coupled(
    G_n: SinkedMultigraph,
    G_m: SinkedMultigraph,
    window: Sequence[Hashable],
    engine: WalkEngine,
    sample: int = 0,
) -> tuple[dict, dict, CouplingDiagnostics]:
    """Coupled draws of the uniform spanning trees of ``G_n`` and ``G_m``.

    Walks start from the closed neighbourhood of the window (labels valid in
    both graphs) in a fixed order, walk ``j`` using the generator
    ``engine.generator(sample, j)`` in both graphs, so the two walks coincide
    step for step until one of them stops.  A walk of ``G_n`` that leaves
    ``V_n`` is absorbed at the sink there.  Only these walks are run: the
    resulting partial forests carry the exact joint law of the full trees on
    the window's tree edges and heights.

    Returns ``(forest_n, forest_m, diagnostics)``; forests map labels to the
    label of the parent (the sink label for sink edges).
    """
    emb = _check_nested(G_n, G_m)
    win_n = [G_n.index(v) for v in window]
    if any(v == G_n.sink for v in win_n):
        raise InputError("window must not contain the sink")
    starts_n = closed_neighborhood(G_n, win_n)
    starts = [G_n.label(v) for v in starts_n]
    inside = np.zeros(G_m.n_vertices + 1, dtype=np.bool_)
    inside[emb[:-1]] = True
    heights = {}
    forests = {}
    hit_times: dict[str, list[int]] = {}
    exit_times: list[int | None] = []
    for role, G in (("n", G_n), ("m", G_m)):
        st = _LocalState(G)
        n_added = 0
        idx = [G.index(v) for v in starts]
        hits = []
        for j, u in enumerate(idx):
            if role == "m":
                exit_times.append(_first_exit(G, u, engine.generator(sample, j), st.in_tree, inside))
            n_added, _, steps = _kernels.lerw_attach(
                G.ptr, G.ports, u, engine.generator(sample, j), st.in_tree, st.parent_port, st.added, n_added
            )
            hits.append(int(steps))
        hit_times[role] = hits
        _kernels.tree_depths(G.ptr, G.ports, st.parent_port, st.added[:n_added], st.depth)
        w = [G.index(v) for v in window]
        heights[role] = [int(_kernels.local_height(G.ptr, G.ports, x, st.depth, st.parent_port)) for x in w]
        forest = {}
        for v in st.added[:n_added]:
            head = int(G.ports[G.ptr[v] + st.parent_port[v]])
            forest[G.label(int(v))] = G.label(head)
        forests[role] = forest
    per_edge = {}
    for v in starts:
        a, b = forests["n"].get(v), forests["m"].get(v)
        per_edge[v] = None if a == G_n.sink_label else bool(a == b)
    diag = CouplingDiagnostics(
        seed=engine.seed,
        sample=sample,
        window=list(window),
        agree=heights["n"] == heights["m"],
        heights_n=heights["n"],
        heights_m=heights["m"],
        per_edge=per_edge,
        exit_times=exit_times,
        hit_times_n=hit_times["n"],
        hit_times_m=hit_times["m"],
    )
    return forests["n"], forests["m"], diag


def _first_exit(G: SinkedMultigraph, start: int, rng: np.random.Generator, in_tree: np.ndarray, inside: np.ndarray) -> int | None:
    """Replay a walk (without attaching it) and return its first step outside ``inside``."""
    u = start
    k = 0
    while not in_tree[u]:
        u = int(G.ports[G.ptr[u] + rng.integers(0, G.ptr[u + 1] - G.ptr[u])])
        k += 1
        if not inside[u]:
            return k
    return None


# ---------------------------------------------------------------------------
# transient graphs


@dataclass
class TruncatedForest:
    """Forest grown from window walks with absorption at a far wired boundary.

    ``parent`` maps labels to parent labels (``None`` for an edge to the
    boundary, i.e. a walk that escaped); ``component`` assigns each vertex the
    index of its tree, numbered by escape order.
    """

    parent: dict
    component: dict
    n_components: int
    window: list

    def window_signature(self) -> tuple:
        """Hashable summary of the forest seen from the window."""
        return tuple((self.parent[v], self.component[v]) for v in self.window)


def sample_wsf_truncated(
    spec: ExhaustionSpec,
    cutoff: int,
    window: Sequence[Hashable],
    engine: WalkEngine,
    sample: int = 0,
    G: SinkedMultigraph | None = None,
) -> TruncatedForest:
    """Approximate the wired spanning forest near ``window`` on a transient graph.

    Runs Wilson's algorithm from the window vertices in order inside the wired
    volume of step ``cutoff``; a walk reaching the sink stands for a walk
    escaping to infinity and starts a new tree.  Pass ``G`` to reuse a
    prebuilt volume.
    """
    if not spec.is_transient():
        raise RecurrentFamily(f"family {spec.family} (d={spec.d}) is recurrent; sample finite volumes directly")
    if G is None:
        G = build_wired(spec, cutoff)
    st = _LocalState(G)
    rng = engine.generator(sample)
    idx = [G.index(v) for v in window]
    component_of_root: dict[int, int] = {}
    parent: dict = {}
    comp_idx = np.full(G.n_vertices + 1, -1, dtype=np.int64)
    n_added = 0
    for u in idx:
        before = n_added
        n_added, hit, _ = _kernels.lerw_attach(G.ptr, G.ports, u, rng, st.in_tree, st.parent_port, st.added, n_added)
        if hit < 0:
            continue
        if hit == G.sink:
            c = len(component_of_root)
            component_of_root[u] = c
        else:
            c = int(comp_idx[hit])
        comp_idx[st.added[before:n_added]] = c
    for v in st.added[:n_added]:
        head = int(G.ports[G.ptr[v] + st.parent_port[v]])
        parent[G.label(int(v))] = None if head == G.sink else G.label(head)
    component = {G.label(int(v)): int(comp_idx[v]) for v in st.added[:n_added]}
    st.reset(n_added)
    return TruncatedForest(parent, component, len(component_of_root), list(window))


# ---------------------------------------------------------------------------
# loop-free times


def count_loopfree(path: Sequence[Hashable], horizon: int) -> list[int]:
    """Indices ``j < horizon`` with ``path[0..j]`` disjoint from ``path(j..horizon]``."""
    if horizon < 0 or horizon > len(path) - 1:
        raise HorizonExceedsPath(f"horizon {horizon} needs a path with at least {horizon + 1} vertices")
    first: dict[Hashable, int] = {}
    last: dict[Hashable, int] = {}
    for k in range(horizon + 1):
        v = path[k]
        first.setdefault(v, k)
        last[v] = k
    bad = np.zeros(horizon + 1, dtype=np.int64)
    for v, f in first.items():
        if last[v] > f:
            bad[f] += 1
            bad[last[v]] -= 1
    covered = np.cumsum(bad)
    return [j for j in range(horizon) if covered[j] == 0]


def regular_tree_walk(d: int, n_steps: int, rng: np.random.Generator, words: bool = True) -> list:
    """Simple random walk on the infinite ``d``-regular tree from the root.

    Vertices are words: the root is ``()``, its children ``(b,)`` for
    ``b < d``, deeper children append a letter ``< d - 1``.  With
    ``words=False`` each vertex is an integer id instead (the root is 0),
    which avoids building long tuples on long walks.
    """
    if d < 2:
        raise InputError("tree degree must be >= 2")
    choices = rng.integers(0, d, size=n_steps)
    if not words:
        up = [-1]
        child: dict[tuple[int, int], int] = {}
        v = 0
        out_ids = [0]
        for c in choices:
            c = int(c)
            if v and c == 0:
                v = up[v]
            else:
                key = (v, c if v == 0 else c - 1)
                w = child.get(key)
                if w is None:
                    w = child[key] = len(up)
                    up.append(v)
                v = w
            out_ids.append(v)
        return out_ids
    word: list[int] = []
    out = [()]
    for c in choices:
        c = int(c)
        if not word:
            word.append(c)
        elif c == 0:
            word.pop()
        else:
            word.append(c - 1)
        out.append(tuple(word))
    return out
