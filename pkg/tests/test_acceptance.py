"""Acceptance criteria 1-10, one test each.

Every test prints a single PASS/FAIL line (collected again in the terminal
summary) before asserting.  Tolerances are fixed constants below.
"""

import math
import time
from fractions import Fraction

import numpy as np

from sandgrove import (
    ExhaustionSpec,
    HeightHistogram,
    LocalSampler,
    WalkEngine,
    avalanche_experiment,
    build_box,
    build_wired,
    closed_neighborhood,
    exhaustion_invariance_test,
    height_histogram,
    permutation_and_fluctuation_stats,
    sample_nu_highdim,
    strip_experiment,
    tree_to_config,
    wilson_coupled,
    wilson_finite,
)
from sandgrove.bijection import height_from_descriptor, neighborhood_descriptor
from sandgrove.treeexact import escape_limit, escape_prob, exact_marginal, exact_marginal_finite
from sandgrove.verify import ALT_ALPHA, check_abelian, check_algebra, check_roundtrip, check_wilson, ci_graphs
from sandgrove.bijection import AlphaConvention
from sandgrove.graphcore import det_laplacian

SIGNIFICANCE = 1e-3
SEEDS = (1, 2, 3)
WILSON_SE = 4.0
TREE_MC_SE = 3.0
TREE_CONVERGENCE = 1e-4
ESCAPE_TOL = 1e-6
SLOPE_RANGE = (-0.65, -0.35)
HIGHDIM_MARGINAL_SE = 4.0
HIGHDIM_SIGMA_SE = 5.0


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def test_criterion_01_algebra(criterion):
    graphs = ci_graphs()
    checks, dt = _timed(lambda: [c for name, G in graphs.items() for c in check_algebra(name, G)])
    values = {"triangle": 3, "box2x2": 192}
    exact = all(det_laplacian(graphs[k]) == v for k, v in values.items())
    ok = all(c.passed for c in checks) and exact and dt < 1.0
    criterion(1, "recurrent = det = trees = smith product", ok, f"{len(checks)} graphs, {dt:.2f}s")
    assert ok


def test_criterion_02_roundtrip(criterion):
    graphs = ci_graphs()
    checks, dt = _timed(
        lambda: [c for name, G in graphs.items() for conv in (AlphaConvention(), ALT_ALPHA) for c in check_roundtrip(name, G, conv)]
    )
    ok = all(c.passed for c in checks) and dt < 10
    criterion(2, "bijection roundtrip, canonical and alternative table", ok, f"{len(checks)} checks, {dt:.2f}s")
    assert ok


def test_criterion_03_abelian(criterion):
    graphs = ci_graphs()
    checks, dt = _timed(lambda: [c for name, G in graphs.items() for c in check_abelian(name, G, 1000, seed=7)])
    ok = all(c.passed for c in checks) and dt < 10
    criterion(3, "abelian property and toppling-order independence", ok, f"1000 trials per graph, {dt:.2f}s")
    assert ok


def test_criterion_04_wilson(criterion):
    checks, dt = _timed(lambda: check_wilson(30000, seed=2024, significance=SIGNIFICANCE))
    ok = all(c.passed for c in checks) and dt < 30
    detail = "; ".join(c.detail for c in checks)
    criterion(4, "Wilson on the triangle, two orders", ok, f"{detail}; {dt:.1f}s")
    assert ok


def test_criterion_05_locality(criterion):
    G = build_box([9, 9])
    eng = WalkEngine(55)

    def run():
        bad = 0
        for i in range(1000):
            t = wilson_finite(G, eng, sample=i)
            eta = tree_to_config(G, t)
            for x in range(G.n_vertices):
                if height_from_descriptor(G, neighborhood_descriptor(G, t, x)) != eta[x]:
                    bad += 1
        return bad

    bad, dt = _timed(run)
    ok = bad == 0 and dt < 30
    criterion(5, "heights from local subtree data on a 9x9 box", ok, f"1000 trees, {bad} mismatches, {dt:.1f}s")
    assert ok


def test_criterion_06_tree_exact(criterion):
    t0 = time.perf_counter()
    notes, ok = [], True
    for d in (3, 4):
        vals = [exact_marginal(d, [()], (h,)) for h in range(d)]
        ok &= sum(vals, Fraction(0)) == 1
        G = build_wired(ExhaustionSpec.tree_ball(d), 10)
        hist = height_histogram(G, None, [()], 100_000, WalkEngine(600 + d))
        z = max(abs(hist.freq[0, h] - float(vals[h])) / hist.se[0, h] for h in range(d))
        ok &= z <= TREE_MC_SE
        gap = max(abs(float(exact_marginal_finite(d, [()], (h,), 20) - vals[h])) for h in range(d))
        ok &= gap < TREE_CONVERGENCE
        notes.append(f"d={d}: sum=1, max|z|={z:.2f}, |delta(n=20)|={gap:.1e}")
    err = max(abs(float(escape_prob(3, n) - Fraction(1, 2))) for n in range(21, 40))
    ok &= err < ESCAPE_TOL and escape_limit(3) == Fraction(1, 2)
    dt = time.perf_counter() - t0
    ok &= dt < 300
    criterion(6, "exact tree marginals", ok, f"{'; '.join(notes)}; escape err {err:.1e}; {dt:.0f}s")
    assert ok


def test_criterion_07_avalanche(criterion):
    spec = ExhaustionSpec.tree_ball(3)
    res, dt = _timed(lambda: avalanche_experiment(spec, 16, (), 100_000, WalkEngine(7)))
    lo, hi = SLOPE_RANGE
    ok = lo <= res.slope <= hi and dt < 600
    criterion(7, "avalanche CCDF slope on the d=3 tree", ok, f"slope {res.slope:.3f} over N in {res.fit_range}, {dt:.0f}s")
    assert ok


def test_criterion_08_invariance(criterion):
    t0 = time.perf_counter()
    G = build_wired(ExhaustionSpec.zd_box(2), 10)
    zwin = [G.label(i) for i in closed_neighborhood(G, [G.index((0, 0))])]
    sq = exhaustion_invariance_test(
        ExhaustionSpec.zd_box(2), 10, ExhaustionSpec.zd_box(2, aspect=[1, 2]), 10, zwin, 20_000, SEEDS, SIGNIFICANCE
    )
    T = build_wired(ExhaustionSpec.tree_ball(3), 16)
    twin = [T.label(i) for i in closed_neighborhood(T, [T.index(())])]
    tr = exhaustion_invariance_test(
        ExhaustionSpec.tree_ball(3), 16, ExhaustionSpec.tree_ball(3, lopsided=True), 16, twin, 20_000, SEEDS, SIGNIFICANCE
    )
    strips = [
        strip_experiment(["u1", "u2"], [["u1", "u2"]], (-2, 60), (-60, 2), 20_000, WalkEngine(s)) for s in SEEDS
    ]
    strip_p = max(r.min_p for r in strips)
    dt = time.perf_counter() - t0
    ok = sq.passed and tr.passed and strip_p < SIGNIFICANCE and dt < 600
    criterion(
        8,
        "exhaustion invariance and the strip dichotomy",
        ok,
        f"Z2 min p {sq.min_p:.3g}, tree min p {tr.min_p:.3g}, strip max p {strip_p:.2g}, {dt:.0f}s",
    )
    assert ok


def test_criterion_09_coupling(criterion):
    spec = ExhaustionSpec.zd_box(2)
    graphs = {r: build_wired(spec, r) for r in (10, 20, 40)}
    G = graphs[10]
    window = [G.label(i) for i in closed_neighborhood(G, [G.index((0, 0))])]

    def freq(n, m):
        return float(np.mean([wilson_coupled(graphs[n], graphs[m], window, WalkEngine(s))[2].agree for s in range(200)]))

    (a, b), dt = _timed(lambda: (freq(10, 20), freq(20, 40)))
    ok = b >= a and dt < 600
    criterion(9, "coupled agreement grows with the radii", ok, f"(10,20): {a:.3f}, (20,40): {b:.3f}, {dt:.0f}s")
    assert ok


def test_criterion_10_highdim(criterion):
    t0 = time.perf_counter()
    spec = ExhaustionSpec.zd_box(5)
    G = build_wired(spec, 4)
    window = [(0,) * 5]
    sampler = LocalSampler(G, [G.index(window[0])])
    eng = WalkEngine(10)

    separated = mismatched = 0
    for i in range(5000):
        s = sample_nu_highdim(spec, 4, window, eng.child(1), i, mode="true", G=G, sampler=sampler)
        if s.decomposition.separated:
            separated += 1
            mismatched += s.heights != s.true_heights

    n = 20_000
    recon = np.array([sample_nu_highdim(spec, 4, window, eng.child(2), i, G=G, sampler=sampler).heights for i in range(n)])
    built = HeightHistogram.from_draws(window, [10], recon)
    direct = height_histogram(G, None, window, n, eng.child(3))
    se = np.sqrt(built.se[0] ** 2 + direct.se[0] ** 2)
    marg_z = float(np.max(np.abs(built.freq[0] - direct.freq[0]) / np.where(se > 0, se, 1)))

    st = permutation_and_fluctuation_stats(G, None, window, 50_000, eng.child(4))
    k2 = st.sigma_freq(2)
    k2_n = st.k_counts.get(2, 0)
    sig_z = max((abs(f - 0.5) / math.sqrt(0.25 / k2_n) for f, _ in k2.values()), default=math.inf) if k2_n else math.inf

    dt = time.perf_counter() - t0
    ok = mismatched == 0 and marg_z <= HIGHDIM_MARGINAL_SE and sig_z <= HIGHDIM_SIGMA_SE and dt < 1200
    criterion(
        10,
        "Z5 ordering construction",
        ok,
        f"{mismatched}/{separated} separated mismatches, marginal max|z| {marg_z:.2f}, "
        f"K=2 in {k2_n} draws max|z| {sig_z:.2f}, {dt:.0f}s",
    )
    assert ok
