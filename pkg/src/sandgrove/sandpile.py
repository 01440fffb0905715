"""Sandpile dynamics: toppling, stabilization, addition operators, burning."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (
    InputError,
    InvalidDistribution,
    TooLarge,
    UnknownVertex,
    UnstableInput,
)
from .graphcore import SinkedMultigraph

__all__ = [
    "AvalancheRecord",
    "BurningResult",
    "GroupActionReport",
    "as_config",
    "is_stable",
    "stabilize",
    "add_and_stabilize",
    "avalanche",
    "markov_step",
    "burning_run",
    "is_allowed_bruteforce",
    "enumerate_recurrent",
    "check_group_action",
]

_ODOMETER_LIMIT = 2**62


@dataclass(frozen=True)
class AvalancheRecord:
    topplings: int
    distinct_sites: int
    lost: int
    radius: int


@dataclass
class BurningResult:
    """Outcome of the burning algorithm.

    ``layers[i]`` is the set burning at time ``i + 1``; ``witness`` is the
    unburnt remainder (an FSC) when the configuration is forbidden.
    """

    layers: list[list[int]]
    allowed: bool
    witness: list[int] = field(default_factory=list)

    def burn_times(self, n: int) -> list[int]:
        times = [0] * n
        for i, layer in enumerate(self.layers, start=1):
            for x in layer:
                times[x] = i
        return times


def as_config(G: SinkedMultigraph, eta: Sequence[int]) -> np.ndarray:
    arr = np.array(eta, dtype=np.int64).reshape(-1)
    if arr.shape[0] != G.n_vertices:
        raise InputError(f"configuration has {arr.shape[0]} entries, graph has {G.n_vertices} vertices")
    if np.any(arr < 0):
        raise InputError("heights must be non-negative")
    return arr


def is_stable(G: SinkedMultigraph, eta: Sequence[int]) -> bool:
    return bool(np.all(np.asarray(eta) < G.deg))


def stabilize(
    G: SinkedMultigraph,
    eta: Sequence[int],
    policy: str = "batch",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stabilize ``eta``; returns ``(stable configuration, odometer)``.

    ``policy="batch"`` is the compiled work-queue engine.  ``"random"`` topples
    one uniformly chosen unstable vertex at a time and ``"sequential"`` always
    the lowest-index one; both exist to exercise order independence.
    """
    h = as_config(G, eta).copy()
    if int(h.sum()) >= _ODOMETER_LIMIT // max(1, int(G.deg.max())):
        raise OverflowError("total mass too large for 64-bit odometer counts")
    odo = np.zeros(G.n_vertices, dtype=np.int64)
    if policy == "batch":
        _kernels.stabilize_inplace(G.ptr, G.ports, h, odo)
        return h, odo
    if policy not in ("random", "sequential"):
        raise InputError(f"unknown toppling policy {policy!r}")
    if policy == "random" and rng is None:
        rng = np.random.default_rng()
    deg = G.deg
    while True:
        unstable = np.flatnonzero(h >= deg)
        if unstable.size == 0:
            return h, odo
        x = int(unstable[0] if policy == "sequential" else rng.choice(unstable))
        h[x] -= deg[x]
        odo[x] += 1
        for y in G.port_slice(x):
            if y != G.sink:
                h[y] += 1


def _check_site(G: SinkedMultigraph, x: int) -> int:
    if not isinstance(x, (int, np.integer)) or not 0 <= int(x) < G.n_vertices:
        raise UnknownVertex(f"no non-sink vertex with index {x!r}")
    return int(x)


def add_and_stabilize(G: SinkedMultigraph, eta: Sequence[int], x: int) -> np.ndarray:
    """Addition operator ``a_x``: one particle at ``x``, then stabilize."""
    x = _check_site(G, x)
    h = as_config(G, eta).copy()
    if not is_stable(G, h):
        raise UnstableInput("addition operators act on stable configurations")
    h[x] += 1
    odo = np.zeros(G.n_vertices, dtype=np.int64)
    _kernels.stabilize_inplace(G.ptr, G.ports, h, odo)
    return h


def avalanche(
    G: SinkedMultigraph, eta: Sequence[int], x: int, dist: np.ndarray | None = None
) -> tuple[np.ndarray, AvalancheRecord]:
    """Apply ``a_x`` and report the avalanche it caused.

    ``dist`` holds graph distances from ``x`` (computed when omitted) and is
    used for the radius.
    """
    x = _check_site(G, x)
    h = as_config(G, eta).copy()
    if not is_stable(G, h):
        raise UnstableInput("addition operators act on stable configurations")
    if dist is None:
        dist = G.bfs_distances(x)
    t, distinct, lost, radius = _kernels.avalanche_once(G.ptr, G.ports, h, x, dist)
    return h, AvalancheRecord(int(t), int(distinct), int(lost), int(radius))


def markov_step(
    G: SinkedMultigraph, eta: Sequence[int], p: Sequence[float], rng: np.random.Generator
) -> np.ndarray:
    """One step of the sandpile chain: ``a_X eta`` with ``X ~ p``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (G.n_vertices,) or np.any(p <= 0) or not math.isclose(p.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise InvalidDistribution("p must be a strictly positive probability vector on V")
    x = int(rng.choice(G.n_vertices, p=p))
    return add_and_stabilize(G, eta, x)


def burning_run(G: SinkedMultigraph, eta: Sequence[int]) -> BurningResult:
    """Dhar's burning algorithm on a stable configuration."""
    h = as_config(G, eta)
    if not is_stable(G, h):
        raise UnstableInput("burning test needs a stable configuration")
    adj = G.adjacency()
    # unburnt-degree of each vertex: edges to not-yet-burnt vertices
    unburnt_deg = [int(G.deg[x]) - row.get(G.sink, 0) for x, row in enumerate(adj)]
    unburnt = set(range(G.n_vertices))
    layers: list[list[int]] = []
    while unburnt:
        layer = sorted(x for x in unburnt if h[x] >= unburnt_deg[x])
        if not layer:
            return BurningResult(layers, False, sorted(unburnt))
        layers.append(layer)
        unburnt.difference_update(layer)
        for x in layer:
            for y, m in adj[x].items():
                if y != G.sink:
                    unburnt_deg[y] -= m
    return BurningResult(layers, True)


def is_allowed_bruteforce(G: SinkedMultigraph, eta: Sequence[int], max_vertices: int = 20) -> bool:
    """True iff no nonempty ``F`` has ``eta_x < deg_F(x)`` for all ``x`` in ``F``."""
    n = G.n_vertices
    if n > max_vertices:
        raise TooLarge(f"exhaustive subset search limited to {max_vertices} vertices")
    h = as_config(G, eta)
    adj = G.adjacency()
    nbr = [[(y, m) for y, m in adj[x].items() if y != G.sink] for x in range(n)]
    for mask in range(1, 1 << n):
        forbidden = True
        for x in range(n):
            if not mask >> x & 1:
                continue
            deg_f = sum(m for y, m in nbr[x] if mask >> y & 1)
            if h[x] >= deg_f:
                forbidden = False
                break
        if forbidden:
            return False
    return True


def enumerate_recurrent(G: SinkedMultigraph, cap: int = 10**6) -> list[tuple[int, ...]]:
    """All recurrent (equivalently, allowed) configurations, sorted."""
    size = math.prod(int(d) for d in G.deg)
    if size > cap:
        raise TooLarge(f"{size} stable configurations exceed the cap {cap}")
    return [
        eta
        for eta in itertools.product(*(range(int(d)) for d in G.deg))
        if burning_run(G, eta).allowed
    ]


@dataclass
class GroupActionReport:
    """How the addition operators act on the recurrent set."""

    n_recurrent: int
    bijective: dict[int, bool]
    orders: dict[int, int]
    commuting: bool
    group_order: int

    @property
    def ok(self) -> bool:
        return all(self.bijective.values()) and self.commuting and self.group_order == self.n_recurrent


def _permutation_order(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    order = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        order = order * length // math.gcd(order, length)
    return order


def check_group_action(G: SinkedMultigraph, cap: int = 10**6) -> GroupActionReport:
    """Check that each ``a_x`` permutes the recurrent set and that they commute.

    Also computes the order of the group generated by the ``a_x`` (closure
    under composition), which must equal ``|R_G|``.
    """
    rec = enumerate_recurrent(G, cap)
    pos = {eta: i for i, eta in enumerate(rec)}
    perms: dict[int, tuple[int, ...]] = {}
    bijective: dict[int, bool] = {}
    for x in range(G.n_vertices):
        images = []
        ok = True
        for eta in rec:
            img = tuple(int(v) for v in add_and_stabilize(G, eta, x))
            if img not in pos:
                ok = False
                break
            images.append(pos[img])
        ok = ok and len(set(images)) == len(rec)
        bijective[x] = ok
        if ok:
            perms[x] = tuple(images)
    commuting = len(perms) == G.n_vertices and all(
        all(perms[x][perms[y][i]] == perms[y][perms[x][i]] for i in range(len(rec)))
        for x, y in itertools.combinations(perms, 2)
    )
    identity = tuple(range(len(rec)))
    group = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for g in frontier:
            for p in perms.values():
                h = tuple(p[i] for i in g)
                if h not in group:
                    group.add(h)
                    nxt.append(h)
        frontier = nxt
    return GroupActionReport(
        n_recurrent=len(rec),
        bijective=bijective,
        orders={x: _permutation_order(p) for x, p in perms.items()},
        commuting=commuting,
        group_order=len(group),
    )
