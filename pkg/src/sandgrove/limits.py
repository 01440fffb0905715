"""Finite-volume experiments probing infinite-volume sandpile measures.

Heights on a window are sampled *locally*: running Wilson's algorithm only
from the window and its neighbours already fixes the tree depths that the
bijection needs there, so each draw is exact for the full finite volume while
costing a handful of walks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .bijection import CANONICAL, AlphaConvention, tree_to_config
from .errors import (
    InputError,
    InvalidStrip,
    MismatchedGraphs,
    RecurrentFamily,
    SiteOnBoundary,
    WindowOutsideVolume,
)
from .graphcore import Arborescence, ExhaustionSpec, SinkedMultigraph, build_strip, build_wired
from .sandpile import AvalancheRecord
from .spanning import WalkEngine, closed_neighborhood, wilson_sink

__all__ = [
    "LocalSampler",
    "sample_height_config",
    "HeightHistogram",
    "height_histogram",
    "two_sample_chi2",
    "InvarianceReport",
    "exhaustion_invariance_test",
    "StripResult",
    "strip_experiment",
    "ComponentDecomposition",
    "decompose_neighborhood",
    "heights_from_decomposition",
    "HighDimSample",
    "sample_nu_highdim",
    "PermutationStats",
    "permutation_and_fluctuation_stats",
    "AvalancheResult",
    "avalanche_experiment",
    "ccdf_slope",
    "default_fit_range",
]


def _resolve_window(G: SinkedMultigraph, window: Sequence[Hashable], need_neighbors: bool = True) -> list[int]:
    out = []
    for v in window:
        try:
            i = G.index(v)
        except KeyError:
            raise WindowOutsideVolume(f"window vertex {v!r} is not in the volume") from None
        if i == G.sink:
            raise WindowOutsideVolume("window must not contain the sink")
        if need_neighbors and np.any(G.port_slice(i) == G.sink):
            raise WindowOutsideVolume(f"window vertex {v!r} touches the boundary")
        out.append(i)
    if not out:
        raise InputError("window is empty")
    return out


class LocalSampler:
    """Exact draws of the stationary heights on a fixed window of ``G``.

    The window may touch the sink; walks start from the window and its
    non-sink neighbours in :func:`closed_neighborhood` order.
    """

    def __init__(self, G: SinkedMultigraph, window: Sequence[int]):
        self.G = G
        self.window = np.asarray(window, dtype=np.int64)
        self.starts = np.asarray(closed_neighborhood(G, list(window)), dtype=np.int64)
        n = G.n_vertices
        self._in_tree = np.zeros(n + 1, dtype=np.bool_)
        self._in_tree[n] = True
        self._parent = np.full(n + 1, -1, dtype=np.int64)
        self._depth = np.full(n + 1, -1, dtype=np.int64)
        self._depth[n] = 0
        self._added = np.empty(n, dtype=np.int64)

    def clone(self) -> "LocalSampler":
        return LocalSampler(self.G, self.window)

    def draw(self, rng: np.random.Generator, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.empty(len(self.window), dtype=np.int64)
        G = self.G
        _kernels.local_sample(
            G.ptr, G.ports, self.starts, self.window, rng,
            self._in_tree, self._parent, self._depth, self._added, out,
        )
        return out

    def draw_forest(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
        """Run the window walks and keep the partial forest.

        Returns ``(parent_port, depth, added, n_added)`` views into scratch
        storage; call :meth:`release` before the next draw.
        """
        G = self.G
        n_added = 0
        for u in self.starts:
            n_added, _, _ = _kernels.lerw_attach(
                G.ptr, G.ports, int(u), rng, self._in_tree, self._parent, self._added, n_added
            )
        _kernels.tree_depths(G.ptr, G.ports, self._parent, self._added[:n_added], self._depth)
        return self._parent, self._depth, self._added, n_added

    def release(self, n_added: int) -> None:
        idx = self._added[:n_added]
        self._in_tree[idx] = False
        self._depth[idx] = -1

    def draw_many(self, engine: WalkEngine, samples: int, start: int = 0) -> np.ndarray:
        out = np.empty((samples, len(self.window)), dtype=np.int64)
        for i in range(samples):
            self.draw(engine.generator(start + i), out[i])
        return out


def sample_height_config(
    G: SinkedMultigraph, engine: WalkEngine, sample: int = 0, convention: AlphaConvention = CANONICAL
) -> np.ndarray:
    """One draw from the stationary (uniform recurrent) measure on ``G``."""
    rng = engine.generator(sample)
    parent = wilson_sink(G, rng)
    if not convention.is_canonical:
        return tree_to_config(G, G.arborescence_from_ports(parent), convention)
    return _heights_from_ports(G, parent)


def _heights_from_ports(G: SinkedMultigraph, parent: np.ndarray) -> np.ndarray:
    depth = np.full(G.n_vertices + 1, -1, dtype=np.int64)
    depth[G.sink] = 0
    _kernels.tree_depths(G.ptr, G.ports, parent, np.arange(G.n_vertices, dtype=np.int64), depth)
    out = np.empty(G.n_vertices, dtype=np.int64)
    _kernels.all_heights(G.ptr, G.ports, depth, parent, out)
    return out


# ---------------------------------------------------------------------------
# histograms


@dataclass
class HeightHistogram:
    """Height counts per window vertex, plus joint counts of window patterns."""

    window: list
    degrees: list[int]
    counts: np.ndarray
    joint: dict[tuple[int, ...], int]
    samples: int

    @classmethod
    def from_draws(cls, window: Sequence[Hashable], degrees: Sequence[int], draws: np.ndarray) -> "HeightHistogram":
        k = max(degrees)
        counts = np.zeros((len(window), k), dtype=np.int64)
        for i in range(len(window)):
            counts[i] = np.bincount(draws[:, i], minlength=k)[:k]
        patterns, cnt = np.unique(draws, axis=0, return_counts=True)
        joint = {tuple(int(v) for v in p): int(c) for p, c in zip(patterns, cnt)}
        return cls(list(window), list(map(int, degrees)), counts, joint, int(draws.shape[0]))

    def merge(self, other: "HeightHistogram") -> "HeightHistogram":
        if self.window != other.window or self.degrees != other.degrees:
            raise MismatchedGraphs("histograms cover different windows")
        joint = dict(self.joint)
        for p, c in other.joint.items():
            joint[p] = joint.get(p, 0) + c
        return HeightHistogram(self.window, self.degrees, self.counts + other.counts, joint, self.samples + other.samples)

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.samples

    @property
    def se(self) -> np.ndarray:
        p = self.freq
        return np.sqrt(p * (1 - p) / self.samples)

    def rows(self) -> list[tuple]:
        return [
            (self.window[i], h, int(self.counts[i, h]))
            for i in range(len(self.window))
            for h in range(self.degrees[i])
        ]


def _parallel_draws(sampler: LocalSampler, engine: WalkEngine, samples: int, threads: int) -> np.ndarray:
    if threads <= 1 or samples < 2 * threads:
        return sampler.draw_many(engine, samples)
    bounds = np.linspace(0, samples, threads + 1).astype(int)
    workers = [sampler.clone() for _ in range(threads)]
    with ThreadPoolExecutor(threads) as pool:
        parts = list(
            pool.map(
                lambda i: workers[i].draw_many(engine, int(bounds[i + 1] - bounds[i]), int(bounds[i])),
                range(threads),
            )
        )
    return np.concatenate(parts, axis=0)


def height_histogram(
    spec: ExhaustionSpec | SinkedMultigraph,
    n: int | None,
    window: Sequence[Hashable],
    samples: int,
    engine: WalkEngine,
    threads: int = 1,
) -> HeightHistogram:
    """Empirical height marginals on ``window`` under the measure of ``G_n``.

    Sample ``i`` uses ``engine.generator(i)``, so output does not depend on
    ``threads``.
    """
    if samples < 1:
        raise InputError("samples must be >= 1")
    G = spec if isinstance(spec, SinkedMultigraph) else build_wired(spec, n)
    idx = _resolve_window(G, window)
    draws = _parallel_draws(LocalSampler(G, idx), engine, samples, threads)
    return HeightHistogram.from_draws(list(window), [int(G.deg[i]) for i in idx], draws)


def two_sample_chi2(a: Sequence[int], b: Sequence[int]) -> tuple[float, float, int]:
    """Homogeneity test of two count vectors; returns ``(statistic, p, dof)``."""
    table = np.vstack([np.asarray(a, dtype=float), np.asarray(b, dtype=float)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0, 1.0, 0
    res = stats.chi2_contingency(table, correction=False)
    return float(res[0]), float(res[1]), int(res[2])


def _joint_vectors(h1: HeightHistogram, h2: HeightHistogram) -> tuple[list[int], list[int]]:
    keys = sorted(set(h1.joint) | set(h2.joint))
    return [h1.joint.get(k, 0) for k in keys], [h2.joint.get(k, 0) for k in keys]


@dataclass
class InvarianceReport:
    """Two-sample homogeneity tests between two exhaustions, per seed."""

    window: list
    significance: float
    seeds: list[int]
    p_values: list[dict]
    histograms: list[tuple[HeightHistogram, HeightHistogram]] = field(repr=False, default_factory=list)

    @property
    def min_p(self) -> float:
        return min(min(p.values()) for p in self.p_values)

    @property
    def passed(self) -> bool:
        return self.min_p >= self.significance

    def to_dict(self) -> dict:
        return {
            "window": [list(v) if isinstance(v, tuple) else v for v in self.window],
            "significance": self.significance,
            "seeds": self.seeds,
            "p_values": [{str(k): v for k, v in p.items()} for p in self.p_values],
            "min_p": self.min_p,
            "passed": self.passed,
        }


def _same_infinite_graph(a: ExhaustionSpec, b: ExhaustionSpec) -> bool:
    if a.family != b.family:
        return False
    if a.family in ("zd_box", "tree_ball"):
        return a.params["d"] == b.params["d"]
    if a.family == "strip":
        return (
            a.params["g0_vertices"] == b.params["g0_vertices"]
            and sorted(map(sorted, a.params["g0_edges"])) == sorted(map(sorted, b.params["g0_edges"]))
        )
    return True


def compare_histograms(h1: HeightHistogram, h2: HeightHistogram) -> dict:
    """p-values per window vertex and (for larger windows) of the joint pattern."""
    out = {}
    for i, v in enumerate(h1.window):
        out[v] = two_sample_chi2(h1.counts[i], h2.counts[i])[1]
    if len(h1.window) > 1:
        out["joint"] = two_sample_chi2(*_joint_vectors(h1, h2))[1]
    return out


def exhaustion_invariance_test(
    spec_a: ExhaustionSpec,
    n_a: int,
    spec_b: ExhaustionSpec,
    n_b: int,
    window: Sequence[Hashable],
    samples: int,
    seeds: Sequence[int] = (1, 2, 3),
    significance: float = 1e-3,
    threads: int = 1,
) -> InvarianceReport:
    """Do two exhaustions give the same window marginals?

    Each seed draws independent samples from ``G_{n_a}`` (stream 0) and
    ``G_{n_b}`` (stream 1) and runs a chi-square homogeneity test per window
    vertex, plus one on joint patterns when the window has several vertices.
    The test passes when no p-value falls below ``significance``.
    """
    if not _same_infinite_graph(spec_a, spec_b):
        raise MismatchedGraphs("the two exhaustions do not describe the same infinite graph")
    G_a, G_b = build_wired(spec_a, n_a), build_wired(spec_b, n_b)
    report = InvarianceReport(list(window), significance, list(seeds), [])
    for seed in seeds:
        h1 = height_histogram(G_a, None, window, samples, WalkEngine(seed, 0), threads)
        h2 = height_histogram(G_b, None, window, samples, WalkEngine(seed, 1), threads)
        report.p_values.append(compare_histograms(h1, h2))
        report.histograms.append((h1, h2))
    return report


# ---------------------------------------------------------------------------
# strips


@dataclass
class StripResult:
    window: list
    volumes: tuple[tuple[int, int], tuple[int, int]]
    first: HeightHistogram
    second: HeightHistogram
    p_values: dict
    flagged: bool

    @property
    def min_p(self) -> float:
        return min(self.p_values.values())

    def to_dict(self) -> dict:
        return {
            "window": [list(v) for v in self.window],
            "volumes": [list(v) for v in self.volumes],
            "p_values": {str(k): v for k, v in self.p_values.items()},
            "min_p": self.min_p,
            "flagged_single_vertex_g0": self.flagged,
        }


def _volume_stream(stream: int, left: int, right: int) -> int:
    return (int(stream) << 32) | ((left & 0xFFFF) << 16) | (right & 0xFFFF)


def strip_experiment(
    g0_vertices: Sequence[Hashable],
    g0_edges: Sequence[Sequence[Hashable]],
    first: tuple[int, int],
    second: tuple[int, int],
    samples: int,
    engine: WalkEngine,
    window: Sequence[tuple[int, Hashable]] | None = None,
    threads: int = 1,
) -> StripResult:
    """Window statistics on ``Z x G0`` under two strongly asymmetric volumes.

    Volumes are ``(left, right)`` column ranges with ``left < 0 < right``.  The
    default window is columns 0 and 1 times all of ``G0``: a single site is
    useless here because reflecting the columns maps the two volumes onto
    each other and fixes column 0.
    """
    g0_vertices = list(g0_vertices)
    for left, right in (first, second):
        if not left < 0 < right:
            raise InvalidStrip(f"strip volume ({left}, {right}) must satisfy left < 0 < right")
    flagged = len(g0_vertices) < 2
    if flagged:
        warnings.warn("G0 has a single vertex; two distinct limits are not expected", stacklevel=2)
    if window is None:
        cols = (0, 1) if min(first[1], second[1]) >= 2 else (0,)
        window = [(k, u) for k in cols for u in g0_vertices]
    hists = []
    for left, right in (first, second):
        G = build_strip(g0_vertices, g0_edges, left, right)
        idx = _resolve_window(G, window, need_neighbors=False)
        # the stream is keyed by the volume: equal volumes reproduce each other,
        # distinct volumes draw independently
        sub = WalkEngine(engine.seed, _volume_stream(engine.stream, left, right))
        draws = _parallel_draws(LocalSampler(G, idx), sub, samples, threads)
        hists.append(HeightHistogram.from_draws(list(window), [int(G.deg[i]) for i in idx], draws))
    return StripResult(list(window), (tuple(first), tuple(second)), hists[0], hists[1], compare_histograms(*hists), flagged)


# ---------------------------------------------------------------------------
# component decomposition


@dataclass
class ComponentDecomposition:
    """How the tree paths from a window neighbourhood split into trees.

    Components are the trees of the forest obtained by deleting the sink that
    meet the neighbourhood, numbered by the first neighbourhood vertex they
    contain.  ``roots[i]`` is the meeting vertex of the paths from
    ``members[i]``, ``parent[i]`` the edges of the rooted subtree ``F`` and
    ``fdepth[i]`` distances to the root inside it.  ``rel_depth[(i, j)]`` is
    root depth of ``i`` minus that of ``j``.
    """

    members: list[list[int]]
    roots: list[int]
    root_depths: list[int]
    parent: list[dict[int, tuple[int, int]]]
    fdepth: list[dict[int, int]]
    diameters: list[int]
    order: list[int]

    @property
    def K(self) -> int:
        return len(self.members)

    @property
    def diam_max(self) -> int:
        return max(self.diameters)

    @property
    def rel_depth(self) -> dict[tuple[int, int], int]:
        d = self.root_depths
        return {(i, j): d[i] - d[j] for i in range(self.K) for j in range(i + 1, self.K)}

    @property
    def sigma(self) -> tuple[int, ...]:
        """Components sorted by root depth, lower index first on ties."""
        return tuple(sorted(range(self.K), key=lambda i: (self.root_depths[i], i)))

    @property
    def min_gap(self) -> int | None:
        rel = self.rel_depth
        return min(abs(v) for v in rel.values()) if rel else None

    @property
    def separated(self) -> bool:
        """Root depths differ by more than the largest subtree diameter."""
        gap = self.min_gap
        return gap is None or gap > self.diam_max


def _tree_diameter(root: int, parent: dict[int, tuple[int, int]]) -> int:
    adj: dict[int, list[int]] = {root: []}
    for v, (y, _) in parent.items():
        adj.setdefault(v, []).append(y)
        adj.setdefault(y, []).append(v)

    def farthest(src: int) -> tuple[int, int]:
        dist = {src: 0}
        stack = [src]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    stack.append(w)
        far = max(dist, key=dist.get)
        return far, dist[far]

    a, _ = farthest(root)
    return farthest(a)[1]


def _decompose(members: Sequence[int], sink: int, head, edge, depth) -> ComponentDecomposition:
    paths: dict[int, list[int]] = {}
    comp_key: list[int] = []
    groups: dict[int, int] = {}
    comps: list[list[int]] = []
    for y in members:
        path = [y]
        while head(path[-1]) != sink:
            path.append(head(path[-1]))
        paths[y] = path
        key = path[-1]
        if key not in groups:
            groups[key] = len(comps)
            comps.append([])
        comps[groups[key]].append(y)
        comp_key.append(key)
    roots, rdepth, parents, fdepths, diams = [], [], [], [], []
    for group in comps:
        common = set(paths[group[0]])
        for y in group[1:]:
            common.intersection_update(paths[y])
        root = max(common, key=depth)
        parent, fd = {}, {root: 0}
        for y in group:
            path = paths[y]
            top = path.index(root)
            for i, v in enumerate(path[:top]):
                parent[v] = edge(v)
                fd[v] = top - i
        roots.append(root)
        rdepth.append(int(depth(root)))
        parents.append(parent)
        fdepths.append(fd)
        diams.append(_tree_diameter(root, parent))
    dec = ComponentDecomposition(comps, roots, rdepth, parents, fdepths, diams, [])
    dec.order = list(dec.sigma)
    return dec


def decompose_neighborhood(G: SinkedMultigraph, tree: Arborescence, window: Sequence[Hashable]) -> ComponentDecomposition:
    """Component data of ``tree`` around ``window`` (labels).

    Window vertices may touch the sink; sink neighbours are simply skipped.
    """
    idx = _resolve_window(G, window, need_neighbors=False)
    members = closed_neighborhood(G, idx)
    depths = tree.depths()
    return _decompose(members, G.sink, lambda v: tree.heads[v], tree.edge, lambda v: depths[v])


def _decompose_ports(G: SinkedMultigraph, members: Sequence[int], parent_port: np.ndarray, depth: np.ndarray) -> ComponentDecomposition:
    ptr, ports, par = G.ptr, G.ports, G.parallel_index()

    def head(v: int) -> int:
        return int(ports[ptr[v] + parent_port[v]])

    def edge(v: int) -> tuple[int, int]:
        p = ptr[v] + parent_port[v]
        return int(ports[p]), int(par[p])

    return _decompose(members, G.sink, head, edge, lambda v: int(depth[v]))


def heights_from_decomposition(
    G: SinkedMultigraph,
    dec: ComponentDecomposition,
    window: Sequence[int],
    ranks: Sequence[int] | None = None,
    convention: AlphaConvention = CANONICAL,
) -> list[int]:
    """Window heights rebuilt from the per-component subtrees and an ordering.

    Component ``i`` gets rank ``ranks[i]`` (default: its position in
    ``dec.sigma``); its root is placed at depth ``(rank + 1) * (diam_max + 1)``
    and every subtree vertex keeps its distance above the root.  Relative
    depths between components then only carry their order.
    """
    from .bijection import height_from_depths

    if ranks is None:
        ranks = [0] * dec.K
        for r, i in enumerate(dec.sigma):
            ranks[i] = r
    spacing = dec.diam_max + 1
    depth: dict[int, int] = {}
    tree_edge: dict[int, tuple[int, int]] = {}
    for i in range(dec.K):
        base = (ranks[i] + 1) * spacing
        for v, fd in dec.fdepth[i].items():
            depth[v] = base + fd
        tree_edge.update(dec.parent[i])
    return [height_from_depths(G, x, depth, tree_edge[x], convention) for x in window]


# ---------------------------------------------------------------------------
# high-dimensional construction


@dataclass
class HighDimSample:
    heights: list[int]
    true_heights: list[int]
    decomposition: ComponentDecomposition
    ranks: list[int]


def _highdim_graph(spec: ExhaustionSpec, cutoff: int) -> SinkedMultigraph:
    if not spec.is_transient():
        raise RecurrentFamily(f"family {spec.family} (d={spec.d}) is recurrent")
    return build_wired(spec, cutoff)


def sample_nu_highdim(
    spec: ExhaustionSpec,
    cutoff: int,
    window: Sequence[Hashable],
    engine: WalkEngine,
    sample: int = 0,
    mode: str = "uniform",
    G: SinkedMultigraph | None = None,
    sampler: LocalSampler | None = None,
) -> HighDimSample:
    """Window heights from the forest near the window and an ordering of its trees.

    The forest comes from walks absorbed at the boundary of step ``cutoff``.
    ``mode="uniform"`` orders the trees by independent uniform ranks;
    ``mode="true"`` uses the order of their root depths in the finite volume.
    ``true_heights`` are the finite-volume heights of the same forest.
    """
    if mode not in ("uniform", "true"):
        raise InputError(f"unknown mode {mode!r}")
    if G is None:
        G = _highdim_graph(spec, cutoff)
    if sampler is None:
        sampler = LocalSampler(G, _resolve_window(G, window))
    rng = engine.generator(sample)
    parent, depth, added, n_added = sampler.draw_forest(rng)
    try:
        members = [int(v) for v in sampler.starts]
        dec = _decompose_ports(G, members, parent, depth)
        true_heights = [int(_kernels.local_height(G.ptr, G.ports, int(x), depth, parent)) for x in sampler.window]
    finally:
        sampler.release(n_added)
    if mode == "true":
        ranks = None
    else:
        u = rng.random(dec.K)
        ranks = [0] * dec.K
        for r, i in enumerate(np.argsort(u, kind="stable")):
            ranks[int(i)] = r
    heights = heights_from_decomposition(G, dec, [int(x) for x in sampler.window], ranks)
    if ranks is None:
        ranks = [0] * dec.K
        for r, i in enumerate(dec.sigma):
            ranks[i] = r
    return HighDimSample(heights, true_heights, dec, list(ranks))


@dataclass
class PermutationStats:
    """Ordering frequencies of the window's trees and gaps between their roots."""

    samples: int
    k_counts: dict[int, int]
    sigma_counts: dict[int, dict[tuple[int, ...], int]]
    min_gaps: list[int]
    separated: int
    degenerate: bool

    def sigma_freq(self, k: int) -> dict[tuple[int, ...], tuple[float, float]]:
        """``sigma -> (frequency, standard error)`` among samples with ``K = k``."""
        counts = self.sigma_counts.get(k, {})
        total = sum(counts.values())
        out = {}
        for s in sorted(counts):
            p = counts[s] / total
            out[s] = (p, math.sqrt(p * (1 - p) / total))
        return out

    def gap_cdf(self, m: int) -> float:
        if not self.min_gaps:
            return float("nan")
        return float(np.mean(np.asarray(self.min_gaps) <= m))

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "k_counts": {str(k): v for k, v in sorted(self.k_counts.items())},
            "sigma_counts": {
                str(k): {",".join(map(str, s)): c for s, c in sorted(v.items())}
                for k, v in sorted(self.sigma_counts.items())
            },
            "gap_cdf": {str(m): self.gap_cdf(m) for m in range(0, 6)},
            "separated": self.separated,
            "degenerate_fluctuations": self.degenerate,
        }


def permutation_and_fluctuation_stats(
    spec: ExhaustionSpec | SinkedMultigraph,
    n: int | None,
    window: Sequence[Hashable],
    samples: int,
    engine: WalkEngine,
) -> PermutationStats:
    """Empirical law of the number of trees, their depth order and root gaps.

    On regular trees every path to the boundary has the same length, so the
    gap statistic carries no information; the result is then flagged.
    """
    G = spec if isinstance(spec, SinkedMultigraph) else build_wired(spec, n)
    degenerate = G.family == "tree_ball"
    if degenerate:
        warnings.warn("root-depth gaps do not fluctuate on regular trees", stacklevel=2)
    sampler = LocalSampler(G, _resolve_window(G, window))
    members = [int(v) for v in sampler.starts]
    k_counts: dict[int, int] = {}
    sigma_counts: dict[int, dict[tuple[int, ...], int]] = {}
    gaps: list[int] = []
    separated = 0
    for i in range(samples):
        parent, depth, _, n_added = sampler.draw_forest(engine.generator(i))
        try:
            dec = _decompose_ports(G, members, parent, depth)
        finally:
            sampler.release(n_added)
        k_counts[dec.K] = k_counts.get(dec.K, 0) + 1
        bucket = sigma_counts.setdefault(dec.K, {})
        bucket[dec.sigma] = bucket.get(dec.sigma, 0) + 1
        if dec.K > 1:
            gaps.append(dec.min_gap)
        separated += dec.separated
    return PermutationStats(samples, k_counts, sigma_counts, gaps, separated, degenerate)


# ---------------------------------------------------------------------------
# avalanches


def ccdf_slope(values: np.ndarray, lo: float, hi: float, points: int = 12) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log P[X >= k]`` against ``log k``.

    ``k`` runs over a log-spaced integer grid in ``[lo, hi]``.
    """
    values = np.sort(np.asarray(values))
    grid = np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))
    tail = 1.0 - np.searchsorted(values, grid, side="left") / len(values)
    ok = tail > 0
    if ok.sum() < 2:
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(grid[ok]), np.log(tail[ok]), 1)
    return float(slope), float(intercept)


def default_fit_range(G: SinkedMultigraph, dist: np.ndarray) -> tuple[float, float]:
    """``[10, min(sqrt|V|, 2 r)]`` with ``r`` the distance from the site to the
    outermost layer of the volume.

    The second bound matters on trees: toppled clusters there are thin, with
    radius close to half their size, so clusters larger than ``2 r`` are cut
    by the boundary long before ``sqrt|V|`` is reached.
    """
    r = int(dist[G.sink]) - 1
    hi = min(math.sqrt(G.n_vertices), 2.0 * r)
    return 10.0, max(hi, 20.0)


@dataclass
class AvalancheResult:
    site: Hashable
    records: np.ndarray
    n_vertices: int
    fit_range: tuple[float, float]
    slope: float
    intercept: float

    def record(self, i: int) -> AvalancheRecord:
        return AvalancheRecord(*(int(v) for v in self.records[i]))

    @property
    def distinct(self) -> np.ndarray:
        return self.records[:, 1]

    def to_dict(self) -> dict:
        d = self.distinct
        return {
            "site": list(self.site) if isinstance(self.site, tuple) else self.site,
            "samples": int(len(d)),
            "n_vertices": self.n_vertices,
            "fit_range": list(self.fit_range),
            "ccdf_slope": self.slope,
            "intercept": self.intercept,
            "max_distinct": int(d.max()) if len(d) else 0,
            "mean_distinct": float(d.mean()) if len(d) else 0.0,
            "fraction_toppling": float((d > 0).mean()) if len(d) else 0.0,
        }


def avalanche_experiment(
    spec: ExhaustionSpec | SinkedMultigraph,
    n: int | None,
    site: Hashable,
    samples: int,
    engine: WalkEngine,
    decorrelate: int = 20,
    restart_every: int = 2000,
    fit_range: tuple[float, float] | None = None,
) -> AvalancheResult:
    """Avalanches caused by one particle added at ``site`` in stationarity.

    The tail fit uses :func:`default_fit_range` unless ``fit_range`` is given.

    Each block of ``restart_every`` records starts from an exact stationary
    draw (full Wilson tree plus bijection).  Between records the chain applies
    ``decorrelate`` additions at uniform random vertices; every addition
    operator preserves the stationary law, so each record is an exact draw,
    with mild correlation inside a block.
    """
    if samples < 1:
        raise InputError("samples must be >= 1")
    G = spec if isinstance(spec, SinkedMultigraph) else build_wired(spec, n)
    try:
        x = G.index(site)
    except KeyError:
        raise WindowOutsideVolume(f"site {site!r} is not in the volume") from None
    if x == G.sink or np.any(G.port_slice(x) == G.sink):
        raise SiteOnBoundary(f"site {site!r} is adjacent to the sink")
    dist = G.bfs_distances(x)
    records = np.empty((samples, 4), dtype=np.int64)
    done = 0
    block = 0
    while done < samples:
        m = min(restart_every, samples - done)
        rng = engine.generator(block)
        heights = _heights_from_ports(G, wilson_sink(G, rng))
        _kernels.avalanche_chain(G.ptr, G.ports, heights, x, dist, rng, m, decorrelate, records[done : done + m])
        done += m
        block += 1
    if fit_range is None:
        fit_range = default_fit_range(G, dist)
    slope, intercept = ccdf_slope(records[:, 1], *fit_range)
    return AvalancheResult(site, records, G.n_vertices, tuple(fit_range), slope, intercept)
