"""File formats: graph JSON, CSV tables and versioned JSON summaries."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Hashable, Iterable, Sequence

import numpy as np

from .errors import InputError
from .graphcore import Arborescence, SinkedMultigraph, build_graph

SCHEMA = 1


def format_label(label: Hashable) -> str:
    """Text form of a vertex label: tuples become ``a:b:c`` and ``()`` for the root."""
    if isinstance(label, tuple):
        return ":".join(map(str, label)) if label else "()"
    return str(label)


def _label_lookup(G: SinkedMultigraph) -> dict[str, int]:
    out = {format_label(G.label(i)): i for i in range(G.n_vertices)}
    out[format_label(G.sink_label)] = G.sink
    return out


def _as_label(v: Any) -> Hashable:
    return tuple(_as_label(x) for x in v) if isinstance(v, list) else v


def load_graph_json(path: str | Path) -> SinkedMultigraph:
    """Read ``{"vertices": [...], "sink": "s", "edges": [[x, y, mult], ...]}``."""
    try:
        data = json.loads(Path(path).read_text())
        sink = _as_label(data.get("sink", "s"))
        edges = [(_as_label(e[0]), _as_label(e[1]), int(e[2]) if len(e) > 2 else 1) for e in data["edges"]]
        vertices = [_as_label(v) for v in data.get("vertices", [])]
    except (OSError, ValueError, KeyError, TypeError, IndexError, AttributeError) as exc:
        raise InputError(f"cannot read graph file {path}: {exc}") from None
    return build_graph(edges, sink, vertices or None)


def graph_to_json(G: SinkedMultigraph) -> dict:
    def enc(v):
        return list(v) if isinstance(v, tuple) else v

    sink = G.sink
    edges = []
    for x, row in enumerate(G.adjacency()):
        for y, m in sorted(row.items()):
            if y > x:
                edges.append([enc(G.label(x)), enc(G.label(y) if y != sink else G.sink_label), m])
    return {"vertices": [enc(G.label(i)) for i in range(G.n_vertices)], "sink": enc(G.sink_label), "edges": edges}


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def write_heights_csv(path: str | Path, G: SinkedMultigraph, eta: Sequence[int]) -> None:
    write_rows(path, ("vertex", "height"), ((format_label(G.label(i)), int(h)) for i, h in enumerate(eta)))


def read_heights_csv(path: str | Path, G: SinkedMultigraph) -> np.ndarray:
    lookup = _label_lookup(G)
    eta = np.full(G.n_vertices, -1, dtype=np.int64)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                eta[lookup[row["vertex"]]] = int(row["height"])
            except (KeyError, ValueError, TypeError) as exc:
                raise InputError(f"bad height row {row}: {exc}") from None
    if np.any(eta < 0):
        raise InputError("height file does not cover every vertex")
    return eta


def write_arborescence_csv(path: str | Path, G: SinkedMultigraph, t: Arborescence) -> None:
    rows = []
    for x in range(G.n_vertices + 1):
        if x == t.root:
            continue
        y, k = t.edge(x)
        rows.append((format_label(G.label(x)), format_label(G.label(y)), k))
    write_rows(path, ("vertex", "parent", "parallel_index"), rows)


def read_arborescence_csv(path: str | Path, G: SinkedMultigraph) -> Arborescence:
    lookup = _label_lookup(G)
    parent = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                parent[lookup[row["vertex"]]] = (lookup[row["parent"]], int(row["parallel_index"]))
            except (KeyError, ValueError) as exc:
                raise InputError(f"bad tree row {row}: {exc}") from None
    roots = set(range(G.n_vertices + 1)) - set(parent)
    if len(roots) != 1:
        raise InputError("tree file must leave exactly one vertex without a parent")
    t = Arborescence.from_parent_map(G, parent, roots.pop())
    t.validate(G)
    return t


def write_histogram_csv(path: str | Path, hist) -> None:
    write_rows(path, ("vertex", "height", "count"), ((format_label(v), h, c) for v, h, c in hist.rows()))


def write_avalanche_csv(path: str | Path, seed: int, site: Hashable, records: np.ndarray) -> None:
    s = format_label(site)
    write_rows(
        path,
        ("seed", "site", "topplings", "distinct", "lost", "radius"),
        ((seed, s, *map(int, r)) for r in records),
    )


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (tuple, set, frozenset)):
        return list(o)
    if hasattr(o, "numerator") and hasattr(o, "denominator"):
        return f"{o.numerator}/{o.denominator}"
    raise TypeError(f"cannot serialise {type(o).__name__}")


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def write_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(dumps(obj))
