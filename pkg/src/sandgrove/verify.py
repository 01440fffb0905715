"""Built-in oracle suite on small graphs.

Each check returns a :class:`Check`; :func:`run_suites` collects them.  The
same functions back the test suite and ``sandgrove verify``.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import stats

from .bijection import (
    AlphaConvention,
    config_to_tree,
    height_from_descriptor,
    height_from_reduced,
    local_data,
    neighborhood_descriptor,
    tree_to_config,
)
from .graphcore import (
    SinkedMultigraph,
    build_box,
    build_graph,
    det_laplacian,
    enumerate_spanning_trees,
    iter_stable_configs,
    laplacian,
    smith_invariants,
)
from .sandpile import (
    add_and_stabilize,
    burning_run,
    check_group_action,
    enumerate_recurrent,
    is_allowed_bruteforce,
    stabilize,
)
from .spanning import WalkEngine, wilson_finite

SUITES = ("algebra", "sandpile", "bijection", "wilson")
ALT_ALPHA = AlphaConvention("shuffled", seed=11)


@dataclass
class Check:
    suite: str
    name: str
    graph: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def triangle() -> SinkedMultigraph:
    return build_graph([("a", "b", 1), ("a", "s", 1), ("b", "s", 1)])


def k4_with_sink() -> SinkedMultigraph:
    return build_graph([(u, v, 1) for u, v in itertools.combinations(["a", "b", "c", "s"], 2)])


def multigraph() -> SinkedMultigraph:
    return build_graph([("a", "b", 2), ("a", "s", 1), ("b", "c", 1), ("c", "s", 2), ("b", "s", 1)])


def ci_graphs() -> dict[str, SinkedMultigraph]:
    return {
        "triangle": triangle(),
        "box2x2": build_box([2, 2]),
        "box2x3": build_box([2, 3]),
        "k4_sink": k4_with_sink(),
        "multigraph": multigraph(),
    }


# ---------------------------------------------------------------------------
# individual checks


def check_algebra(name: str, G: SinkedMultigraph) -> list[Check]:
    det = det_laplacian(G)
    n_rec = len(enumerate_recurrent(G))
    n_trees = len(enumerate_spanning_trees(G))
    snf = math.prod(smith_invariants(laplacian(G)))
    ok = det == n_rec == n_trees == snf
    return [Check("algebra", "recurrent=det=trees=smith", name, ok, f"{n_rec} {det} {n_trees} {snf}")]


def random_config(G: SinkedMultigraph, rng: np.random.Generator, scale: int = 3) -> np.ndarray:
    return rng.integers(0, scale * G.deg)


def check_abelian(name: str, G: SinkedMultigraph, trials: int = 1000, seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    commute = order = conserve = True
    adj = G.adjacency()
    for _ in range(trials):
        eta = random_config(G, rng)
        base, odo = stabilize(G, eta)
        for policy in ("random", "sequential"):
            other, odo2 = stabilize(G, eta, policy=policy, rng=rng)
            if not (np.array_equal(base, other) and np.array_equal(odo, odo2)):
                order = False
        expect = eta - odo * G.deg
        for x, row in enumerate(adj):
            for y, m in row.items():
                if y != G.sink:
                    expect[y] += m * odo[x]
        if not np.array_equal(expect, base):
            conserve = False
        x, y = (int(v) for v in rng.integers(0, G.n_vertices, 2))
        if not np.array_equal(
            add_and_stabilize(G, add_and_stabilize(G, base, y), x),
            add_and_stabilize(G, add_and_stabilize(G, base, x), y),
        ):
            commute = False
    return [
        Check("sandpile", "abelian a_x a_y = a_y a_x", name, commute, f"{trials} trials"),
        Check("sandpile", "toppling order independence", name, order, f"{trials} trials, random and sequential"),
        Check("sandpile", "conservation", name, conserve, f"{trials} trials"),
    ]


def check_burning(name: str, G: SinkedMultigraph) -> list[Check]:
    ok = all(
        burning_run(G, eta).allowed == is_allowed_bruteforce(G, eta)
        for eta in iter_stable_configs(G)
    )
    rep = check_group_action(G)
    return [
        Check("sandpile", "burning = forbidden-set search", name, ok),
        Check("sandpile", "addition operators form the sandpile group", name, rep.ok, f"order {rep.group_order}"),
    ]


def check_roundtrip(name: str, G: SinkedMultigraph, convention: AlphaConvention) -> list[Check]:
    rec = enumerate_recurrent(G)
    trees = enumerate_spanning_trees(G)
    fwd = all(tuple(tree_to_config(G, config_to_tree(G, eta, convention), convention)) == eta for eta in rec)
    bwd = all(config_to_tree(G, tree_to_config(G, t, convention), convention) == t for t in trees)
    images = {tuple(tree_to_config(G, t, convention)) for t in trees}
    return [
        Check("bijection", f"roundtrip on configurations ({convention.rule})", name, fwd, f"{len(rec)} configs"),
        Check("bijection", f"roundtrip on trees ({convention.rule})", name, bwd, f"{len(trees)} trees"),
        Check("bijection", f"image is the recurrent set ({convention.rule})", name, images == set(rec)),
    ]


def check_locality(name: str, G: SinkedMultigraph) -> list[Check]:
    ok_desc = ok_red = True
    for t in enumerate_spanning_trees(G):
        eta = tree_to_config(G, t)
        for x in range(G.n_vertices):
            if height_from_descriptor(G, neighborhood_descriptor(G, t, x)) != eta[x]:
                ok_desc = False
            d = local_data(G, t, x)
            if height_from_reduced(G, x, d.n, d.P, d.e) != eta[x] or not (d.K[0] <= eta[x] <= d.K[-1]):
                ok_red = False
    return [
        Check("bijection", "height from rooted neighbourhood subtree", name, ok_desc),
        Check("bijection", "height from reduced local data", name, ok_red),
    ]


def check_wilson(samples: int = 30000, seed: int = 2024, significance: float = 1e-3) -> list[Check]:
    """Tree frequencies and transported heights on the triangle, two orders."""
    G = triangle()
    trees = enumerate_spanning_trees(G)
    out = []
    for label, order in (("index order", [0, 1]), ("reversed order", [1, 0])):
        eng = WalkEngine(seed, 0 if label == "index order" else 1)
        tree_counts: Counter = Counter()
        height_counts: Counter = Counter()
        for i in range(samples):
            t = wilson_finite(G, eng, order=order, sample=i)
            tree_counts[t] += 1
            height_counts[tuple(tree_to_config(G, t))] += 1
        p = 1 / len(trees)
        se = math.sqrt(p * (1 - p) / samples)
        worst = max(abs(tree_counts[t] / samples - p) / se for t in trees)
        rec = enumerate_recurrent(G)
        chi_p = stats.chisquare([height_counts[r] for r in rec]).pvalue
        out.append(Check("wilson", f"tree frequencies within 4 SE ({label})", "triangle", worst <= 4, f"max |z| = {worst:.2f}"))
        out.append(
            Check("wilson", f"transported heights uniform ({label})", "triangle", chi_p >= significance and set(height_counts) == set(rec), f"p = {chi_p:.3g}")
        )
    return out


# ---------------------------------------------------------------------------


def run_suites(only: Iterable[str] | None = None, graphs: dict[str, SinkedMultigraph] | None = None, quick: bool = False) -> list[Check]:
    only = set(only or SUITES)
    unknown = only - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}; choose from {SUITES}")
    graphs = graphs if graphs is not None else ci_graphs()
    trials = 100 if quick else 1000
    jobs: list[Callable[[], list[Check]]] = []
    for name, G in graphs.items():
        if "algebra" in only:
            jobs.append(lambda n=name, g=G: check_algebra(n, g))
        if "sandpile" in only:
            jobs.append(lambda n=name, g=G: check_abelian(n, g, trials))
            jobs.append(lambda n=name, g=G: check_burning(n, g))
        if "bijection" in only:
            jobs.append(lambda n=name, g=G: check_roundtrip(n, g, AlphaConvention()))
            jobs.append(lambda n=name, g=G: check_roundtrip(n, g, ALT_ALPHA))
            jobs.append(lambda n=name, g=G: check_locality(n, g))
    if "wilson" in only:
        jobs.append(lambda: check_wilson(3000 if quick else 30000))
    checks: list[Check] = []
    for job in jobs:
        checks.extend(job())
    return checks
