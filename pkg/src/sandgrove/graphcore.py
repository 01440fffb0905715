"""Finite sinked multigraphs, wired exhaustions and exact integer linear algebra.

A :class:`SinkedMultigraph` stores its edges as *ports*: vertex ``x`` owns
``deg(x)`` consecutive slots ``ports[ptr[x]:ptr[x+1]]``, one per edge end, each
holding the index of the neighbour at the other end.  Parallel edges appear as
repeated entries, and the ``k``-th occurrence of ``y`` among the ports of ``x``
is parallel edge ``k`` of the pair ``{x, y}``.  The sink always has index
``n_vertices`` and owns no ports.

Graphs built from an exhaustion keep lattice labels and a fixed port order per
lattice direction, so a uniformly chosen port index means the same step in
every volume of the exhaustion.
"""

from __future__ import annotations

import bisect
import itertools
from collections import deque
from dataclasses import dataclass, field
from math import gcd
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    EmptyVertexSet,
    InputError,
    InvalidTree,
    SingularMatrix,
    TooManyTrees,
    UnknownVertex,
    UnsupportedFamily,
)

__all__ = [
    "SinkedMultigraph",
    "Arborescence",
    "ExhaustionSpec",
    "build_graph",
    "build_box",
    "build_tree_ball",
    "build_strip",
    "build_wired",
    "embed_indices",
    "laplacian",
    "det_laplacian",
    "bareiss_det",
    "smith_invariants",
    "enumerate_spanning_trees",
    "iter_stable_configs",
]


# ---------------------------------------------------------------------------
# label maps


class _ListLabels:
    def __init__(self, labels: Sequence[Hashable]):
        self._labels = list(labels)
        self._index = {lab: i for i, lab in enumerate(self._labels)}

    def __len__(self) -> int:
        return len(self._labels)

    def __getitem__(self, i: int) -> Hashable:
        return self._labels[i]

    def index(self, label: Hashable) -> int:
        return self._index[label]


class _BoxLabels:
    """Lexicographic indexing of the integer box ``prod [lo_i, lo_i + side_i)``."""

    def __init__(self, lo: Sequence[int], sides: Sequence[int]):
        self.lo = tuple(int(v) for v in lo)
        self.sides = tuple(int(v) for v in sides)
        self._n = int(np.prod(self.sides))

    def __len__(self) -> int:
        return self._n

    def __getitem__(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self._n:
            raise IndexError(i)
        coords = np.unravel_index(int(i), self.sides)
        return tuple(int(c) + lo for c, lo in zip(coords, self.lo))

    def index(self, label: Sequence[int]) -> int:
        if len(label) != len(self.sides):
            raise KeyError(label)
        rel = [int(c) - lo for c, lo in zip(label, self.lo)]
        if any(r < 0 or r >= s for r, s in zip(rel, self.sides)):
            raise KeyError(label)
        return int(np.ravel_multi_index(rel, self.sides))


class _TreeLabels:
    """Breadth-first indexing of a ball in the d-regular tree.

    Vertices are words: ``()`` is the root ``o``; ``(b,)`` for ``b < d`` are its
    neighbours; every further letter is in ``range(d - 1)`` and names a child.
    The subtree through root neighbour ``b`` is kept down to level
    ``depths[b] - 1``.
    """

    def __init__(self, d: int, depths: Sequence[int]):
        self.d = d
        self.depths = tuple(int(v) for v in depths)
        self.levels = max(self.depths)
        # included branches, block size and index offset per level
        self._incl: list[list[int]] = [[]]
        self._offset = [0, 1]
        for lev in range(1, self.levels):
            incl = [b for b in range(d) if self.depths[b] > lev]
            self._incl.append(incl)
            self._offset.append(self._offset[-1] + len(incl) * self.block(lev))

    def block(self, lev: int) -> int:
        return (self.d - 1) ** (lev - 1)

    def __len__(self) -> int:
        return self._offset[-1]

    def __getitem__(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < len(self):
            raise IndexError(i)
        if i == 0:
            return ()
        lev = bisect.bisect_right(self._offset, i) - 1
        rank = i - self._offset[lev]
        size = self.block(lev)
        b = self._incl[lev][rank // size]
        rest = rank % size
        digits = []
        for _ in range(lev - 1):
            digits.append(rest % (self.d - 1))
            rest //= self.d - 1
        return (b,) + tuple(reversed(digits))

    def index(self, word: Sequence[int]) -> int:
        word = tuple(word)
        lev = len(word)
        if lev == 0:
            return 0
        b = word[0]
        if not 0 <= b < self.d or lev >= self.depths[b]:
            raise KeyError(word)
        rest = 0
        for c in word[1:]:
            if not 0 <= c < self.d - 1:
                raise KeyError(word)
            rest = rest * (self.d - 1) + c
        pos = self._incl[lev].index(b)
        return self._offset[lev] + pos * self.block(lev) + rest


class _StripLabels:
    def __init__(self, g0: Sequence[Hashable], left: int, right: int):
        self.g0 = list(g0)
        self._g0_index = {u: i for i, u in enumerate(self.g0)}
        self.left, self.right = left, right

    def __len__(self) -> int:
        return (self.right - self.left + 1) * len(self.g0)

    def __getitem__(self, i: int) -> tuple[int, Hashable]:
        if not 0 <= i < len(self):
            raise IndexError(i)
        k, u = divmod(i, len(self.g0))
        return (self.left + k, self.g0[u])

    def index(self, label: tuple[int, Hashable]) -> int:
        k, u = label
        if not self.left <= k <= self.right or u not in self._g0_index:
            raise KeyError(label)
        return (k - self.left) * len(self.g0) + self._g0_index[u]


# ---------------------------------------------------------------------------
# graph type


class SinkedMultigraph:
    """Finite connected multigraph ``V + {s}`` with a distinguished sink.

    Vertices of ``V`` are the indices ``0 .. n_vertices - 1``; the sink is
    ``n_vertices``.  Instances are treated as immutable.
    """

    def __init__(
        self,
        ptr: np.ndarray,
        ports: np.ndarray,
        labels: Any,
        sink_label: Hashable = "s",
        *,
        family: str = "explicit",
        info: dict | None = None,
        check: bool = True,
    ):
        self.ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self.ports = np.ascontiguousarray(ports, dtype=np.int64)
        self.ptr.setflags(write=False)
        self.ports.setflags(write=False)
        self.n_vertices = len(self.ptr) - 1
        self.sink = self.n_vertices
        self.labels = labels
        self.sink_label = sink_label
        self.family = family
        self.info = dict(info or {})
        self.deg = np.diff(self.ptr)
        self.deg.setflags(write=False)
        self._adj: list[dict[int, int]] | None = None
        self._par: np.ndarray | None = None
        if self.n_vertices < 1:
            raise EmptyVertexSet("graph needs at least one non-sink vertex")
        if check:
            self._check()

    # construction checks ---------------------------------------------------
    def _check(self) -> None:
        if np.any(self.deg < 1):
            raise DisconnectedGraph("every non-sink vertex needs degree >= 1")
        if np.any(self.ports < 0) or np.any(self.ports > self.sink):
            raise InputError("port entry out of range")
        seen = np.zeros(self.n_vertices + 1, dtype=bool)
        seen[0] = True
        queue = deque([0])
        # the sink has no port list; walking through it reaches every sink neighbour
        owner = np.repeat(np.arange(self.n_vertices), np.diff(self.ptr))
        sink_nbrs = np.unique(owner[self.ports == self.sink])
        while queue:
            x = queue.popleft()
            for y in self.ports[self.ptr[x] : self.ptr[x + 1]]:
                if seen[y]:
                    continue
                seen[y] = True
                if y != self.sink:
                    queue.append(int(y))
                    continue
                for z in sink_nbrs:
                    if not seen[z]:
                        seen[z] = True
                        queue.append(int(z))
        if not seen.all():
            raise DisconnectedGraph("graph on V + {s} is not connected")

    # basic queries ------------------------------------------------------------
    def __repr__(self) -> str:
        return (
            f"SinkedMultigraph(family={self.family!r}, n_vertices={self.n_vertices}, "
            f"sink_edges={self.sink_edge_count()})"
        )

    def __len__(self) -> int:
        return self.n_vertices

    def label(self, i: int) -> Hashable:
        """Label of vertex index ``i`` (the sink maps to ``sink_label``)."""
        if i == self.sink:
            return self.sink_label
        return self.labels[i]

    def index(self, label: Hashable) -> int:
        """Vertex index of ``label``; raises :class:`UnknownVertex`."""
        if label == self.sink_label:
            return self.sink
        try:
            return self.labels.index(label)
        except (KeyError, ValueError, TypeError):
            raise UnknownVertex(f"unknown vertex {label!r}") from None

    def port_slice(self, x: int) -> np.ndarray:
        return self.ports[self.ptr[x] : self.ptr[x + 1]]

    def adjacency(self) -> list[dict[int, int]]:
        """``adj[x][y] = a_xy`` for non-sink ``x`` (``y`` may be the sink)."""
        if self._adj is None:
            adj = []
            for x in range(self.n_vertices):
                row: dict[int, int] = {}
                for y in self.port_slice(x):
                    row[int(y)] = row.get(int(y), 0) + 1
                adj.append(row)
            self._adj = adj
        return self._adj

    def mult(self, x: int, y: int) -> int:
        if x == self.sink:
            x, y = y, x
        if x == self.sink:
            return 0
        return self.adjacency()[x].get(y, 0)

    def neighbors(self, x: int) -> list[int]:
        """Distinct neighbours of ``x`` (including the sink) in index order."""
        return sorted(self.adjacency()[x])

    def sink_edge_count(self) -> int:
        return int(np.count_nonzero(self.ports == self.sink))

    def edges(self) -> list[tuple[int, int, int]]:
        """Undirected edges ``(x, y, k)`` with ``x < y`` and parallel index ``k``."""
        out = []
        for x, row in enumerate(self.adjacency()):
            for y in sorted(row):
                if y > x:
                    out.extend((x, y, k) for k in range(row[y]))
        return out

    def head_and_index(self, x: int, port: int) -> tuple[int, int]:
        """Neighbour and parallel-edge index of the ``port``-th slot of ``x``."""
        segment = self.port_slice(x)
        y = int(segment[port])
        return y, int(np.count_nonzero(segment[:port] == y))

    def port_of(self, x: int, y: int, k: int = 0) -> int:
        """Inverse of :meth:`head_and_index`."""
        hits = np.flatnonzero(self.port_slice(x) == y)
        if k >= len(hits):
            raise InputError(f"no parallel edge {k} between {x} and {y}")
        return int(hits[k])

    def parallel_index(self) -> np.ndarray:
        """Parallel-edge index of every port slot (aligned with ``ports``)."""
        if self._par is None:
            par = np.zeros(len(self.ports), dtype=np.int64)
            for x in range(self.n_vertices):
                seen: dict[int, int] = {}
                for p in range(self.ptr[x], self.ptr[x + 1]):
                    y = int(self.ports[p])
                    par[p] = seen.get(y, 0)
                    seen[y] = par[p] + 1
            par.setflags(write=False)
            self._par = par
        return self._par

    def arborescence_from_ports(self, parent_port: np.ndarray) -> "Arborescence":
        """Sink-rooted arborescence from one chosen port per vertex."""
        slots = self.ptr[:-1] + np.asarray(parent_port[: self.n_vertices], dtype=np.int64)
        heads = self.ports[slots].tolist() + [-1]
        idx = self.parallel_index()[slots].tolist() + [-1]
        return Arborescence(tuple(heads), tuple(idx), self.sink)

    def bfs_distances(self, source: int) -> np.ndarray:
        """Graph distance from ``source`` to every vertex (sink included)."""
        dist = np.full(self.n_vertices + 1, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        # sink adjacency has to be recovered from the ports of its neighbours
        sink_nbrs = None
        while queue:
            x = queue.popleft()
            if x == self.sink:
                if sink_nbrs is None:
                    sink_nbrs = np.unique(
                        np.repeat(np.arange(self.n_vertices), self.deg)[self.ports == self.sink]
                    )
                nbrs = sink_nbrs
            else:
                nbrs = self.port_slice(x)
            for y in nbrs:
                if dist[y] < 0:
                    dist[y] = dist[x] + 1
                    queue.append(int(y))
        return dist


@dataclass(frozen=True)
class Arborescence:
    """Spanning tree with every edge directed toward ``root``.

    ``heads[x]`` is the head of the edge leaving ``x`` and ``indices[x]`` its
    parallel-edge index; both hold ``-1`` at the root.  Arrays cover all
    ``n_vertices + 1`` vertices, the sink included.
    """

    heads: tuple[int, ...]
    indices: tuple[int, ...]
    root: int

    @classmethod
    def from_parent_map(
        cls, G: SinkedMultigraph, parent: dict[int, tuple[int, int]], root: int | None = None
    ) -> "Arborescence":
        root = G.sink if root is None else root
        heads = [-1] * (G.n_vertices + 1)
        idx = [-1] * (G.n_vertices + 1)
        for x, (y, k) in parent.items():
            heads[x] = y
            idx[x] = k
        return cls(tuple(heads), tuple(idx), root)

    def edge(self, x: int) -> tuple[int, int]:
        return self.heads[x], self.indices[x]

    def depths(self) -> list[int]:
        """Tree distance to the root for every vertex."""
        n = len(self.heads)
        depth = [-1] * n
        depth[self.root] = 0
        for x in range(n):
            path = []
            y = x
            while depth[y] < 0:
                path.append(y)
                y = self.heads[y]
                if y < 0 or len(path) > n:
                    raise InvalidTree("parent pointers do not lead to the root")
            base = depth[y]
            for z in reversed(path):
                base += 1
                depth[z] = base
        return depth

    def validate(self, G: SinkedMultigraph) -> None:
        if len(self.heads) != G.n_vertices + 1 or len(self.indices) != len(self.heads):
            raise InvalidTree("wrong number of vertices")
        for x in range(G.n_vertices + 1):
            if x == self.root:
                if self.heads[x] != -1:
                    raise InvalidTree("root must not have an outgoing edge")
                continue
            y, k = self.heads[x], self.indices[x]
            if y < 0 or not 0 <= k < G.mult(x, y):
                raise InvalidTree(f"vertex {x}: no edge ({x}, {y}, {k}) in the graph")
        self.depths()

    def edge_set(self) -> frozenset[tuple[int, int, int]]:
        """Undirected edges ``(min, max, k)`` used by the tree."""
        return frozenset(
            (min(x, y), max(x, y), k)
            for x, (y, k) in enumerate(zip(self.heads, self.indices))
            if y >= 0
        )


# ---------------------------------------------------------------------------
# builders


def build_graph(
    edges: Iterable[Sequence[Any]], sink_label: Hashable = "s", vertices: Sequence[Hashable] | None = None
) -> SinkedMultigraph:
    """Build a sinked multigraph from ``(x, y, multiplicity)`` triples.

    Vertices are indexed by first appearance (``vertices`` fixes the order
    explicitly).  Loop edges are dropped.  Ports are listed by neighbour index,
    sink last.
    """
    order: list[Hashable] = list(vertices or [])
    index = {v: i for i, v in enumerate(order)}
    if sink_label in index:
        raise InputError("sink must not be listed among the vertices")
    mult: dict[tuple[Hashable, Hashable], int] = {}
    saw_sink = False
    for item in edges:
        if len(item) == 2:
            x, y = item
            m = 1
        else:
            x, y, m = item
        m = int(m)
        if m < 1:
            raise InputError(f"multiplicity must be >= 1, got {m} for edge {x}-{y}")
        for v in (x, y):
            if v == sink_label:
                saw_sink = True
            elif v not in index:
                index[v] = len(order)
                order.append(v)
        if x == y:
            continue
        key = (x, y)
        mult[key] = mult.get(key, 0) + m
        mult[(y, x)] = mult.get((y, x), 0) + m
    if not order:
        raise EmptyVertexSet("at least one non-sink vertex is required")
    if not saw_sink:
        raise DisconnectedGraph("sink does not appear in any edge")
    n = len(order)
    rows: list[dict[int, int]] = [dict() for _ in range(n)]
    for (x, y), m in mult.items():
        if x == sink_label:
            continue
        j = n if y == sink_label else index[y]
        rows[index[x]][j] = m
    ptr = [0]
    ports: list[int] = []
    for row in rows:
        for j in sorted(row):
            ports.extend([j] * row[j])
        ptr.append(len(ports))
    return SinkedMultigraph(np.array(ptr), np.array(ports), _ListLabels(order), sink_label)


def build_box(sides: Sequence[int], lo: Sequence[int] | None = None, sink_label: Hashable = "s") -> SinkedMultigraph:
    """Wired box in ``Z^d``; every vertex has degree ``2d``.

    Ports are ordered ``+e_1, -e_1, +e_2, -e_2, ...``.  The default lower
    corner centres the box at the origin (``-(side-1)//2``).
    """
    sides = tuple(int(s) for s in sides)
    if not sides or any(s < 1 for s in sides):
        raise InputError(f"invalid box sides {sides}")
    d = len(sides)
    if lo is None:
        lo = tuple(-((s - 1) // 2) for s in sides)
    n = int(np.prod(sides))
    grid = np.indices(sides).reshape(d, -1)
    ports = np.empty((n, 2 * d), dtype=np.int64)
    for a in range(d):
        for j, step in enumerate((1, -1)):
            nb = grid.copy()
            nb[a] += step
            ok = (nb[a] >= 0) & (nb[a] < sides[a])
            nb[a] = np.clip(nb[a], 0, sides[a] - 1)
            target = np.ravel_multi_index(tuple(nb), sides)
            ports[:, 2 * a + j] = np.where(ok, target, n)
    ptr = np.arange(n + 1, dtype=np.int64) * (2 * d)
    return SinkedMultigraph(
        ptr,
        ports.ravel(),
        _BoxLabels(lo, sides),
        sink_label,
        family="zd_box",
        info={"d": d, "sides": list(sides), "lo": list(lo)},
        check=False,
    )


def build_tree_ball(d: int, depths: int | Sequence[int], sink_label: Hashable = "s") -> SinkedMultigraph:
    """Wired ball in the d-regular tree.

    ``depths`` is either one depth ``n`` (the ball ``{v : |v| <= n - 1}``) or
    one depth per root branch.  Ports: parent first, then children in order.
    """
    if d < 2:
        raise InputError("tree degree must be >= 2")
    if isinstance(depths, (int, np.integer)):
        depths = [int(depths)] * d
    depths = [int(v) for v in depths]
    if len(depths) != d or min(depths) < 1:
        raise InputError(f"need {d} branch depths >= 1, got {depths}")
    lab = _TreeLabels(d, depths)
    n = len(lab)
    ports = np.empty((n, d), dtype=np.int64)
    sink = n

    def level_positions(lev: int) -> np.ndarray:
        size = lab.block(lev)
        return np.concatenate(
            [b * size + np.arange(size, dtype=np.int64) for b in lab._incl[lev]]
        ) if lab._incl[lev] else np.empty(0, dtype=np.int64)

    def rank(lev: int, pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(index, included?) for positions at level ``lev``."""
        if lev >= lab.levels:
            return np.full(pos.shape, sink), np.zeros(pos.shape, dtype=bool)
        size = lab.block(lev)
        branch = pos // size
        lookup = np.full(d, -1, dtype=np.int64)
        for i, b in enumerate(lab._incl[lev]):
            lookup[b] = i
        slot = lookup[branch]
        ok = slot >= 0
        idx = lab._offset[lev] + slot * size + pos % size
        return np.where(ok, idx, sink), ok

    # root
    child_idx, _ = rank(1, np.arange(d, dtype=np.int64))
    ports[0] = child_idx
    for lev in range(1, lab.levels):
        pos = level_positions(lev)
        if pos.size == 0:
            continue
        idx = lab._offset[lev] + np.arange(pos.size)
        if lev == 1:
            parent = np.zeros(pos.size, dtype=np.int64)
        else:
            parent, _ = rank(lev - 1, pos // (d - 1))
        ports[idx, 0] = parent
        for j in range(d - 1):
            cidx, _ = rank(lev + 1, pos * (d - 1) + j)
            ports[idx, 1 + j] = cidx
    ptr = np.arange(n + 1, dtype=np.int64) * d
    return SinkedMultigraph(
        ptr,
        ports.ravel(),
        lab,
        sink_label,
        family="tree_ball",
        info={"d": d, "depths": depths},
        check=False,
    )


def _g0_adjacency(g0_vertices: Sequence[Hashable], g0_edges: Iterable[Sequence[Hashable]]) -> list[list[int]]:
    index = {u: i for i, u in enumerate(g0_vertices)}
    adj: list[list[int]] = [[] for _ in g0_vertices]
    for e in g0_edges:
        u, v = e[0], e[1]
        if u == v:
            continue
        adj[index[u]].append(index[v])
        adj[index[v]].append(index[u])
    for row in adj:
        row.sort()
    return adj


def build_strip(
    g0_vertices: Sequence[Hashable],
    g0_edges: Iterable[Sequence[Hashable]],
    left: int,
    right: int,
    sink_label: Hashable = "s",
) -> SinkedMultigraph:
    """Wired graph of ``{left, ..., right} x G0`` inside ``Z x G0``.

    Ports: ``+1`` step, ``-1`` step, then the ``G0`` neighbours.
    """
    if left > right:
        raise InputError("strip needs left <= right")
    g0_vertices = list(g0_vertices)
    adj = _g0_adjacency(g0_vertices, g0_edges)
    w = len(g0_vertices)
    lab = _StripLabels(g0_vertices, left, right)
    n = len(lab)
    ptr = [0]
    ports: list[int] = []
    cols = right - left + 1
    for k in range(cols):
        for u in range(w):
            ports.append((k + 1) * w + u if k + 1 < cols else n)
            ports.append((k - 1) * w + u if k > 0 else n)
            ports.extend(k * w + v for v in adj[u])
            ptr.append(len(ports))
    return SinkedMultigraph(
        np.array(ptr),
        np.array(ports),
        lab,
        sink_label,
        family="strip",
        info={"g0_vertices": g0_vertices, "g0_edges": [list(e[:2]) for e in g0_edges], "left": left, "right": right},
    )


@dataclass(frozen=True)
class ExhaustionSpec:
    """A nested family of finite volumes ``V_1 ⊂ V_2 ⊂ ...`` of an infinite graph.

    Families and their parameters:

    ``zd_box``
        ``d`` and either ``aspect`` (step ``n`` is the centred box with
        half-widths ``n * aspect``) or ``sides`` (explicit side lengths per step).
    ``tree_ball``
        ``d`` and ``lopsided``: step ``n`` is the ball of depth ``n``, or depth
        ``n`` toward root branch 0 and ``max(1, n // 2)`` elsewhere.
    ``strip``
        ``g0_vertices``, ``g0_edges`` and ``extents``: the list of ``(left, right)``
        pairs, one per step.
    ``explicit``
        ``steps``: a list of edge lists (each a list of ``[x, y, mult]``).
    """

    family: str
    params: dict = field(default_factory=dict)

    @classmethod
    def zd_box(cls, d: int, aspect: Sequence[int] | None = None, sides: Sequence[Sequence[int]] | None = None) -> "ExhaustionSpec":
        params: dict = {"d": int(d)}
        if sides is not None:
            params["sides"] = [list(map(int, s)) for s in sides]
        else:
            params["aspect"] = list(aspect or [1] * d)
        return cls("zd_box", params)

    @classmethod
    def tree_ball(cls, d: int, lopsided: bool = False) -> "ExhaustionSpec":
        return cls("tree_ball", {"d": int(d), "lopsided": bool(lopsided)})

    @classmethod
    def strip(cls, g0_vertices: Sequence[Hashable], g0_edges: Sequence[Sequence[Hashable]], extents: Sequence[Sequence[int]]) -> "ExhaustionSpec":
        return cls(
            "strip",
            {
                "g0_vertices": list(g0_vertices),
                "g0_edges": [list(e) for e in g0_edges],
                "extents": [list(map(int, e)) for e in extents],
            },
        )

    @classmethod
    def explicit(cls, steps: Sequence[Sequence[Sequence[Any]]]) -> "ExhaustionSpec":
        return cls("explicit", {"steps": [list(map(list, s)) for s in steps]})

    @property
    def d(self) -> int | None:
        return self.params.get("d")

    def is_transient(self) -> bool:
        if self.family == "zd_box":
            return self.params["d"] >= 3
        if self.family == "tree_ball":
            return self.params["d"] >= 3
        return False

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params}

    @classmethod
    def from_dict(cls, data: dict) -> "ExhaustionSpec":
        data = dict(data)
        family = data.pop("family")
        return cls(family, data)

    def __hash__(self) -> int:  # params is a dict
        return hash((self.family, repr(sorted(self.params.items()))))


def build_wired(spec: ExhaustionSpec, n: int) -> SinkedMultigraph:
    """Wired graph ``G_n``: everything outside ``V_n`` is identified to the sink."""
    if n < 1:
        raise InputError("step n must be >= 1")
    p = spec.params
    if spec.family == "zd_box":
        if "sides" in p:
            if n > len(p["sides"]):
                raise InputError(f"exhaustion only defines {len(p['sides'])} steps")
            return build_box(p["sides"][n - 1])
        aspect = p.get("aspect") or [1] * p["d"]
        return build_box([2 * n * a + 1 for a in aspect])
    if spec.family == "tree_ball":
        d = p["d"]
        if p.get("lopsided"):
            depths = [n] + [max(1, n // 2)] * (d - 1)
        else:
            depths = [n] * d
        return build_tree_ball(d, depths)
    if spec.family == "strip":
        extents = p["extents"]
        if n > len(extents):
            raise InputError(f"exhaustion only defines {len(extents)} steps")
        left, right = extents[n - 1]
        return build_strip(p["g0_vertices"], p["g0_edges"], left, right)
    if spec.family == "explicit":
        steps = p["steps"]
        if n > len(steps):
            raise InputError(f"exhaustion only defines {len(steps)} steps")
        return build_graph(steps[n - 1], p.get("sink", "s"))
    raise UnsupportedFamily(f"unknown exhaustion family {spec.family!r}")


# ---------------------------------------------------------------------------
# exact integer linear algebra


def embed_indices(small: SinkedMultigraph, big: SinkedMultigraph) -> np.ndarray:
    """Index in ``big`` of every vertex of ``small`` (matched by label).

    The sink of ``small`` maps to ``-1``.  Raises :class:`InputError` when a
    label of ``small`` is missing from ``big``.
    """
    out = np.full(small.n_vertices + 1, -1, dtype=np.int64)
    for i in range(small.n_vertices):
        j = big.index(small.label(i))
        if j == big.sink:
            raise InputError(f"vertex {small.label(i)!r} is the sink of the larger graph")
        out[i] = j
    return out


def laplacian(G: SinkedMultigraph) -> list[list[int]]:
    """Toppling matrix on ``V``: ``deg(x)`` on the diagonal, ``-a_xy`` off it."""
    n = G.n_vertices
    M = [[0] * n for _ in range(n)]
    for x, row in enumerate(G.adjacency()):
        M[x][x] = int(G.deg[x])
        for y, m in row.items():
            if y != G.sink:
                M[x][y] = -m
    return M


def bareiss_det(M: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    A = [list(map(int, row)) for row in M]
    n = len(A)
    if any(len(row) != n for row in A):
        raise InputError("matrix must be square")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k] != 0:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = A[k][k]
        for i in range(k + 1, n):
            aik = A[i][k]
            row_i, row_k = A[i], A[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
            row_i[k] = 0
        prev = akk
    return sign * A[n - 1][n - 1]


def det_laplacian(G: SinkedMultigraph) -> int:
    """``det(Δ_G)``, which is also the number of spanning trees of ``G``."""
    return bareiss_det(laplacian(G))


def smith_invariants(M: Sequence[Sequence[int]]) -> list[int]:
    """Invariant factors ``d_1 | d_2 | ...`` of a nonsingular integer matrix.

    Factors equal to 1 are omitted, so the result describes the cyclic
    decomposition of ``Z^n / Z^n M``.
    """
    A = [list(map(int, row)) for row in M]
    n = len(A)
    if any(len(row) != n for row in A):
        raise InputError("matrix must be square")
    if bareiss_det(A) == 0:
        raise SingularMatrix("Smith form requested for a singular matrix")
    diag = []
    for t in range(n):
        # bring the smallest nonzero entry of the trailing block to (t, t)
        while True:
            best = None
            for i in range(t, n):
                for j in range(t, n):
                    if A[i][j] and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                        best = (i, j)
            i, j = best
            A[t], A[i] = A[i], A[t]
            for row in A:
                row[t], row[j] = row[j], row[t]
            p = A[t][t]
            done = True
            for i in range(t + 1, n):
                q = A[i][t] // p
                if q:
                    A[i] = [a - q * b for a, b in zip(A[i], A[t])]
                if A[i][t]:
                    done = False
            for j in range(t + 1, n):
                q = A[t][j] // p
                if q:
                    for row in A:
                        row[j] -= q * row[t]
                if A[t][j]:
                    done = False
            if not done:
                continue
            # divisibility: p must divide every remaining entry
            bad = next(
                ((i, j) for i in range(t + 1, n) for j in range(t + 1, n) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            A[t] = [a + b for a, b in zip(A[t], A[bad[0]])]
        diag.append(abs(A[t][t]))
    # normalize to a divisibility chain (already one, but cheap to enforce)
    for i in range(len(diag)):
        for j in range(i + 1, len(diag)):
            g = gcd(diag[i], diag[j])
            diag[i], diag[j] = g, diag[i] * diag[j] // g
    return [v for v in diag if v != 1]


# ---------------------------------------------------------------------------
# spanning-tree enumeration


def enumerate_spanning_trees(G: SinkedMultigraph, cap: int = 10**5) -> list[Arborescence]:
    """All spanning trees of ``G`` oriented toward the sink.

    Branches on one frontier edge at a time (take it, or delete it while the
    remaining graph stays connected), so every leaf of the search is a tree.
    """
    total = det_laplacian(G)
    if total > cap:
        raise TooManyTrees(f"{total} spanning trees exceed the cap {cap}")
    n = G.n_vertices
    sink = G.sink
    edges = G.edges()
    incident: list[list[int]] = [[] for _ in range(n + 1)]
    for e, (x, y, _) in enumerate(edges):
        incident[x].append(e)
        incident[y].append(e)
    deleted = [False] * len(edges)
    in_tree = [False] * (n + 1)
    in_tree[sink] = True
    parent: dict[int, tuple[int, int]] = {}
    out: list[Arborescence] = []

    def connected() -> bool:
        seen = [False] * (n + 1)
        seen[sink] = True
        stack = [sink]
        count = 1
        while stack:
            v = stack.pop()
            for e in incident[v]:
                if deleted[e]:
                    continue
                x, y, _ = edges[e]
                w = y if x == v else x
                if not seen[w]:
                    seen[w] = True
                    count += 1
                    stack.append(w)
        return count == n + 1

    def frontier() -> int:
        for e, (x, y, _) in enumerate(edges):
            if not deleted[e] and in_tree[x] != in_tree[y]:
                return e
        return -1

    def rec(size: int) -> None:
        if size == n + 1:
            out.append(Arborescence.from_parent_map(G, parent))
            return
        e = frontier()
        x, y, k = edges[e]
        inner, outer = (x, y) if in_tree[x] else (y, x)
        in_tree[outer] = True
        parent[outer] = (inner, k)
        rec(size + 1)
        del parent[outer]
        in_tree[outer] = False
        deleted[e] = True
        if connected():
            rec(size)
        deleted[e] = False

    rec(1)
    return out


def iter_stable_configs(G: SinkedMultigraph) -> Iterable[tuple[int, ...]]:
    return itertools.product(*(range(int(dg)) for dg in G.deg))
