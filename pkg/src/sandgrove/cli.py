"""Command-line front end.

Every experiment subcommand needs a seed (``--seed`` or ``SANDGROVE_SEED``),
writes its artifacts under ``--out`` (a file stem) and prints a JSON summary
carrying ``schema`` and the hash of the effective configuration.

Exit codes: 0 success, 1 failed verification, 2 bad configuration,
3 failed statistical test under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import io, limits, treeexact
from .errors import SandgroveError
from .graphcore import ExhaustionSpec, SinkedMultigraph, build_box, build_strip, build_wired
from .spanning import WalkEngine, closed_neighborhood, wilson_coupled
from .verify import SUITES, run_suites

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_STAT = 0, 1, 2, 3

G0_PRESETS = {
    "vertex": (["u1"], []),
    "edge": (["u1", "u2"], [["u1", "u2"]]),
    "path3": (["u1", "u2", "u3"], [["u1", "u2"], ["u2", "u3"]]),
    "triangle": (["u1", "u2", "u3"], [["u1", "u2"], ["u2", "u3"], ["u1", "u3"]]),
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser, experiment: bool = True) -> None:
    p.add_argument("--config", help="JSON file with option defaults (flags override)")
    if experiment:
        p.add_argument("--seed", type=int, help="random seed (falls back to $SANDGROVE_SEED)")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", help="output file stem (a .csv or .json suffix is dropped)")
        p.add_argument("--significance", type=float, default=None)
        p.add_argument("--strict", action="store_true", help="exit 3 when a statistical test fails")


def _graph_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=["zd", "tree", "strip", "graph"])
    p.add_argument("--d", type=int, help="lattice dimension or tree degree")
    p.add_argument("--side", type=int, help="cube side (zd)")
    p.add_argument("--sides", help="comma separated box sides (zd)")
    p.add_argument("--depth", type=int, help="ball depth (tree)")
    p.add_argument("--lopsided", action="store_true")
    p.add_argument("--g0", help=f"strip cross-section: one of {sorted(G0_PRESETS)}")
    p.add_argument("--volume", help="strip columns left:right")
    p.add_argument("--graph", help="graph JSON file (family graph)")
    p.add_argument("--window", help="origin, origin+nbrs, or a JSON list of labels")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sandgrove", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the small-graph oracle suite")
    _common(p, experiment=False)
    p.add_argument("--only", action="append", choices=SUITES)
    p.add_argument("--graph", help="also check this graph JSON file")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--report", help="write the JSON report here")

    p = sub.add_parser("sample", help="one stationary height configuration")
    _common(p)
    _graph_opts(p)

    p = sub.add_parser("heights", help="height histogram on a window")
    _common(p)
    _graph_opts(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("invariance", help="compare two exhaustions of one infinite graph")
    _common(p)
    _graph_opts(p)
    p.add_argument("--n", type=int, help="step of both exhaustions")
    p.add_argument("--aspect", help="rectangle aspect for the second Z^d exhaustion, e.g. 1,2")
    p.add_argument("--samples", type=int)
    p.add_argument("--seeds", help="comma separated seeds (default: seed, seed+1, seed+2)")

    p = sub.add_parser("strip", help="strip experiment under two asymmetric volumes")
    _common(p)
    p.add_argument("--g0", default="edge")
    p.add_argument("--volumes", default="-2:60,-60:2")
    p.add_argument("--window", help="JSON list of [column, g0-vertex] labels")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("decompose", help="tree-count, ordering and gap statistics near a window")
    _common(p)
    _graph_opts(p)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("highdim", help="ordering construction versus direct sampling")
    _common(p)
    _graph_opts(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--mode", choices=["uniform", "true"], default=None)

    p = sub.add_parser("avalanche", help="avalanche records and tail fit")
    _common(p)
    _graph_opts(p)
    p.add_argument("--samples", type=int)
    p.add_argument("--site", help="JSON label (default: the origin)")
    p.add_argument("--decorrelate", type=int)
    p.add_argument("--fit-range", help="lo:hi")

    p = sub.add_parser("tree-exact", help="exact height marginals on the regular tree")
    _common(p, experiment=False)
    p.add_argument("--degree", type=int, required=False)
    p.add_argument("--window", default="o", help="o, o+1 or a JSON list of words")
    p.add_argument("--depth", default="inf", help="ball depth or inf")
    p.add_argument("--out")

    p = sub.add_parser("coupling", help="coupled sampling on nested Z^d boxes")
    _common(p)
    _graph_opts(p)
    p.add_argument("--radii", help="comma separated radii, e.g. 10,20")
    p.add_argument("--seeds", type=int, help="number of coupled draws")
    return ap


def _merge_config(args: argparse.Namespace) -> dict:
    cfg: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for k, v in vars(args).items():
        if v is not None and v is not False:
            cfg[k] = v
        else:
            cfg.setdefault(k, v)
    cfg.pop("config", None)
    if cfg.get("out") and args.command != "tree-exact":
        # accept a stem or a file name: "h" and "h.csv" both give h.csv + h.json
        out = Path(cfg["out"])
        if out.suffix in (".csv", ".json", ".jsonl"):
            cfg["out"] = str(out.with_suffix(""))
    return cfg


def _seed(cfg: dict) -> int:
    seed = cfg.get("seed")
    if seed is None:
        env = os.environ.get("SANDGROVE_SEED")
        if env is None:
            raise ConfigError("a seed is required (--seed or SANDGROVE_SEED)")
        try:
            seed = int(env)
        except ValueError:
            raise ConfigError(f"SANDGROVE_SEED must be an integer, got {env!r}") from None
    cfg["seed"] = int(seed)
    return int(seed)


def _require(cfg: dict, key: str, kind=int):
    v = cfg.get(key)
    if v is None:
        raise ConfigError(f"--{key.replace('_', '-')} is required")
    try:
        v = kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for --{key}: {v!r}") from None
    if kind is int and key == "samples" and v < 1:
        raise ConfigError("--samples must be >= 1")
    return v


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in str(text).split(",") if v != ""]
    except ValueError:
        raise ConfigError(f"expected comma separated integers, got {text!r}") from None


def _columns(text: str) -> tuple[int, int]:
    try:
        a, b = str(text).split(":")
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"expected left:right, got {text!r}") from None


def _g0(name: str):
    if name not in G0_PRESETS:
        raise ConfigError(f"unknown g0 {name!r}; choose from {sorted(G0_PRESETS)}")
    return G0_PRESETS[name]


def _spec_and_graph(cfg: dict) -> tuple[ExhaustionSpec | None, SinkedMultigraph, Any]:
    """Exhaustion spec (when there is one), the graph, and its origin label."""
    fam = cfg.get("family")
    if fam == "zd":
        d = _require(cfg, "d")
        if cfg.get("sides"):
            sides = _ints(cfg["sides"])
            if len(sides) != d:
                raise ConfigError("--sides must list d side lengths")
        else:
            sides = [_require(cfg, "side")] * d
        return ExhaustionSpec.zd_box(d, sides=[sides]), build_box(sides), (0,) * d
    if fam == "tree":
        d, depth = _require(cfg, "d"), _require(cfg, "depth")
        spec = ExhaustionSpec.tree_ball(d, bool(cfg.get("lopsided")))
        return spec, build_wired(spec, depth), ()
    if fam == "strip":
        verts, edges = _g0(cfg.get("g0") or "edge")
        left, right = _columns(cfg.get("volume") or "-10:10")
        return None, build_strip(verts, edges, left, right), (0, verts[0])
    if fam == "graph":
        G = io.load_graph_json(_require(cfg, "graph", str))
        return None, G, G.label(0)
    raise ConfigError("--family is required (zd, tree, strip or graph)")


def _labels(value) -> list:
    return [io._as_label(v) for v in value]


def _window(cfg: dict, G: SinkedMultigraph, origin) -> list:
    spec = cfg.get("window") or "origin"
    if spec == "origin":
        return [origin]
    if spec == "origin+nbrs":
        return [G.label(i) for i in closed_neighborhood(G, [G.index(origin)])]
    try:
        return _labels(json.loads(spec))
    except ValueError:
        raise ConfigError(f"cannot parse window {spec!r}") from None


def _emit(cfg: dict, summary: dict, stem: str | None, suffix: str = ".json") -> None:
    summary = {"schema": io.SCHEMA, "config_hash": io.config_hash(_public(cfg)), **summary}
    text = io.dumps(summary)
    if stem:
        Path(stem + suffix).write_text(text)
    sys.stdout.write(text)


def _public(cfg: dict) -> dict:
    return {k: v for k, v in sorted(cfg.items()) if v is not None and k not in ("out", "threads")}


def _strict(cfg: dict, passed: bool) -> int:
    return EXIT_STAT if cfg.get("strict") and not passed else EXIT_OK


# ---------------------------------------------------------------------------
# commands


def cmd_verify(cfg: dict) -> int:
    graphs = None
    if cfg.get("graph"):
        from .verify import ci_graphs

        graphs = ci_graphs()
        graphs[Path(cfg["graph"]).name] = io.load_graph_json(cfg["graph"])
    checks = run_suites(cfg.get("only"), graphs, quick=bool(cfg.get("quick")))
    ok = all(c.passed for c in checks)
    report = {"schema": io.SCHEMA, "passed": ok, "checks": [c.to_dict() for c in checks]}
    if cfg.get("report"):
        io.write_json(cfg["report"], report)
    for c in checks:
        sys.stdout.write(f"{'PASS' if c.passed else 'FAIL'}  {c.suite:9s} {c.graph:12s} {c.name}  {c.detail}\n")
    sys.stdout.write(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sample(cfg: dict) -> int:
    seed = _seed(cfg)
    _, G, _ = _spec_and_graph(cfg)
    eta = limits.sample_height_config(G, WalkEngine(seed))
    if cfg.get("out"):
        io.write_heights_csv(cfg["out"] + ".csv", G, eta)
    _emit(cfg, {"n_vertices": G.n_vertices, "mass": int(eta.sum()), "height_counts": np.bincount(eta).tolist()}, cfg.get("out"))
    return EXIT_OK


def cmd_heights(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    _, G, origin = _spec_and_graph(cfg)
    window = _window(cfg, G, origin)
    hist = limits.height_histogram(G, None, window, samples, WalkEngine(seed), cfg.get("threads") or 1)
    if cfg.get("out"):
        io.write_histogram_csv(cfg["out"] + ".csv", hist)
    _emit(
        cfg,
        {
            "samples": samples,
            "window": [io.format_label(v) for v in window],
            "freq": hist.freq.tolist(),
            "se": hist.se.tolist(),
        },
        cfg.get("out"),
    )
    return EXIT_OK


def _invariance_specs(cfg: dict):
    fam = cfg.get("family")
    if fam == "zd":
        d = _require(cfg, "d")
        aspect = _ints(cfg.get("aspect") or ",".join(["1"] * (d - 1) + ["2"]))
        return ExhaustionSpec.zd_box(d), ExhaustionSpec.zd_box(d, aspect=aspect), (0,) * d
    if fam == "tree":
        d = _require(cfg, "d")
        return ExhaustionSpec.tree_ball(d), ExhaustionSpec.tree_ball(d, lopsided=True), ()
    raise ConfigError("invariance supports --family zd or tree (use the strip command for strips)")


def cmd_invariance(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    n = _require(cfg, "n")
    a, b, origin = _invariance_specs(cfg)
    seeds = _ints(cfg["seeds"]) if cfg.get("seeds") else [seed, seed + 1, seed + 2]
    G = build_wired(a, n)
    window = _window(cfg, G, origin)
    rep = limits.exhaustion_invariance_test(
        a, n, b, n, window, samples, seeds, cfg.get("significance") or 1e-3, cfg.get("threads") or 1
    )
    if cfg.get("out"):
        rows = []
        for s, (h1, h2) in zip(seeds, rep.histograms):
            rows += [(s, "a", io.format_label(v), h, c) for v, h, c in h1.rows()]
            rows += [(s, "b", io.format_label(v), h, c) for v, h, c in h2.rows()]
        io.write_rows(cfg["out"] + ".csv", ("seed", "exhaustion", "vertex", "height", "count"), rows)
    _emit(cfg, rep.to_dict(), cfg.get("out"))
    return _strict(cfg, rep.passed)


def cmd_strip(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    verts, edges = _g0(cfg.get("g0") or "edge")
    vols = [_columns(v) for v in str(cfg.get("volumes")).split(",")]
    if len(vols) != 2:
        raise ConfigError("--volumes needs two left:right pairs")
    window = _labels(json.loads(cfg["window"])) if cfg.get("window") else None
    res = limits.strip_experiment(verts, edges, vols[0], vols[1], samples, WalkEngine(seed), window, cfg.get("threads") or 1)
    if cfg.get("out"):
        rows = [("first", io.format_label(v), h, c) for v, h, c in res.first.rows()]
        rows += [("second", io.format_label(v), h, c) for v, h, c in res.second.rows()]
        io.write_rows(cfg["out"] + ".csv", ("volume", "vertex", "height", "count"), rows)
    sig = cfg.get("significance") or 1e-3
    summary = res.to_dict() | {"diverged": res.min_p < sig}
    _emit(cfg, summary, cfg.get("out"))
    return _strict(cfg, res.min_p < sig)


def cmd_decompose(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    _, G, origin = _spec_and_graph(cfg)
    window = _window(cfg, G, origin)
    st = limits.permutation_and_fluctuation_stats(G, None, window, samples, WalkEngine(seed))
    summary = st.to_dict()
    summary["sigma_freq"] = {
        str(k): {",".join(map(str, s)): list(v) for s, v in st.sigma_freq(k).items()}
        for k in sorted(st.sigma_counts) if k > 1
    }
    _emit(cfg, summary, cfg.get("out"))
    return EXIT_OK


def cmd_highdim(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    spec, G, origin = _spec_and_graph(cfg)
    if spec is None:
        raise ConfigError("highdim needs --family zd or tree")
    window = _window(cfg, G, origin)
    idx = [G.index(v) for v in window]
    sampler = limits.LocalSampler(G, idx)
    mode = cfg.get("mode") or "uniform"
    recon, truth = [], []
    mismatch = separated = 0
    eng = WalkEngine(seed)
    for i in range(samples):
        s = limits.sample_nu_highdim(spec, None, window, eng, i, mode=mode, G=G, sampler=sampler)
        recon.append(s.heights)
        truth.append(s.true_heights)
        if s.decomposition.separated:
            separated += 1
            mismatch += s.heights != s.true_heights
    degs = [int(G.deg[i]) for i in idx]
    h1 = limits.HeightHistogram.from_draws(window, degs, np.asarray(recon))
    h2 = limits.HeightHistogram.from_draws(window, degs, np.asarray(truth))
    summary = {
        "mode": mode,
        "samples": samples,
        "separated": separated,
        "mismatches_when_separated": mismatch,
        "constructed_freq": h1.freq.tolist(),
        "finite_volume_freq": h2.freq.tolist(),
    }
    _emit(cfg, summary, cfg.get("out"))
    return _strict(cfg, mismatch == 0 if mode == "true" else True)


def cmd_avalanche(cfg: dict) -> int:
    seed = _seed(cfg)
    samples = _require(cfg, "samples")
    _, G, origin = _spec_and_graph(cfg)
    site = io._as_label(json.loads(cfg["site"])) if cfg.get("site") else origin
    fit = None
    if cfg.get("fit_range"):
        lo, hi = str(cfg["fit_range"]).split(":")
        fit = (float(lo), float(hi))
    res = limits.avalanche_experiment(
        G, None, site, samples, WalkEngine(seed), decorrelate=cfg.get("decorrelate") or 20, fit_range=fit
    )
    if cfg.get("out"):
        io.write_avalanche_csv(cfg["out"] + ".csv", seed, site, res.records)
    _emit(cfg, res.to_dict(), cfg.get("out"))
    return EXIT_OK


def _tree_window(text: str, d: int) -> list:
    if text == "o":
        return [()]
    if text == "o+1":
        return [(), (0,)]
    try:
        return [tuple(w) for w in json.loads(text)]
    except (ValueError, TypeError):
        raise ConfigError(f"cannot parse tree window {text!r}") from None


def cmd_tree_exact(cfg: dict) -> int:
    d = _require(cfg, "degree")
    A = _tree_window(str(cfg.get("window") or "o"), d)
    depth = str(cfg.get("depth") or "inf")
    n = None if depth == "inf" else int(depth)
    table = treeexact.marginal_table(d, A, n)
    order = sorted({tuple(w) for w in A}, key=lambda w: (len(w), w))
    header = [f"h[{io.format_label(w)}]" for w in order] + ["exact_value", "float_value"]
    rows = [(*h, f"{v.numerator}/{v.denominator}", repr(float(v))) for h, v in table.items()]
    if cfg.get("out"):
        io.write_rows(cfg["out"], header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    total = sum(table.values(), Fraction(0))
    if total != 1:
        sys.stderr.write(f"normalization failed: {total}\n")
        return EXIT_FAIL
    return EXIT_OK


def cmd_coupling(cfg: dict) -> int:
    seed = _seed(cfg)
    d = cfg.get("d") or 2
    radii = _ints(cfg.get("radii") or "10,20")
    if len(radii) != 2 or radii[0] > radii[1]:
        raise ConfigError("--radii needs two increasing radii")
    draws = cfg.get("seeds") or 200
    spec = ExhaustionSpec.zd_box(d)
    Gn, Gm = build_wired(spec, radii[0]), build_wired(spec, radii[1])
    window = _window(cfg | {"window": cfg.get("window") or "origin+nbrs"}, Gn, (0,) * d)
    diags = []
    for i in range(draws):
        _, _, diag = wilson_coupled(Gn, Gm, window, WalkEngine(seed + i))
        diags.append(diag.to_dict(radii))
    agree = float(np.mean([x["agree"] for x in diags]))
    if cfg.get("out"):
        Path(cfg["out"] + ".jsonl").write_text("".join(json.dumps(x, default=io._default) + "\n" for x in diags))
    _emit(cfg, {"radii": radii, "draws": draws, "agreement": agree}, cfg.get("out"))
    return EXIT_OK


COMMANDS = {
    "verify": cmd_verify,
    "sample": cmd_sample,
    "heights": cmd_heights,
    "invariance": cmd_invariance,
    "strip": cmd_strip,
    "decompose": cmd_decompose,
    "highdim": cmd_highdim,
    "avalanche": cmd_avalanche,
    "tree-exact": cmd_tree_exact,
    "coupling": cmd_coupling,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, SandgroveError, ValueError, KeyError, OSError) as exc:
        sys.stderr.write(f"sandgrove {args.command}: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
