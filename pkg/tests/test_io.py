import json

import numpy as np
import pytest

from sandgrove import InputError, WalkEngine, build_box, build_tree_ball, wilson_finite
from sandgrove import io
from sandgrove.limits import height_histogram, sample_height_config
from sandgrove.verify import multigraph, triangle


def test_format_label():
    assert io.format_label((1, -2)) == "1:-2"
    assert io.format_label(()) == "()"
    assert io.format_label("a") == "a"


def test_graph_json_roundtrip(tmp_path):
    for G in (triangle(), multigraph(), build_box([3, 2])):
        p = tmp_path / "g.json"
        p.write_text(json.dumps(io.graph_to_json(G)))
        H = io.load_graph_json(p)
        assert H.n_vertices == G.n_vertices
        assert [H.label(i) for i in range(H.n_vertices)] == [G.label(i) for i in range(G.n_vertices)]
        assert sorted(H.edges()) == sorted(G.edges())


@pytest.mark.parametrize("text", ["{", '{"edges": [[1]]}', '{"vertices": []}', "[]"])
def test_bad_graph_files(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(InputError):
        io.load_graph_json(p)


def test_missing_graph_file(tmp_path):
    with pytest.raises(InputError):
        io.load_graph_json(tmp_path / "none.json")


def test_heights_csv_roundtrip(tmp_path):
    G = build_tree_ball(3, 4)
    eta = sample_height_config(G, WalkEngine(1))
    p = tmp_path / "h.csv"
    io.write_heights_csv(p, G, eta)
    assert np.array_equal(io.read_heights_csv(p, G), eta)
    p.write_text("vertex,height\n():1\n")
    with pytest.raises(InputError):
        io.read_heights_csv(p, G)


def test_tree_csv_roundtrip(tmp_path):
    G = build_box([4, 4])
    t = wilson_finite(G, WalkEngine(2))
    p = tmp_path / "t.csv"
    io.write_arborescence_csv(p, G, t)
    assert io.read_arborescence_csv(p, G) == t


def test_histogram_csv(tmp_path):
    G = build_box([7, 7])
    h = height_histogram(G, None, [(0, 0)], 100, WalkEngine(0))
    p = tmp_path / "h.csv"
    io.write_histogram_csv(p, h)
    lines = p.read_text().splitlines()
    assert lines[0] == "vertex,height,count" and len(lines) == 5
    assert sum(int(l.split(",")[2]) for l in lines[1:]) == 100


def test_config_hash_stable():
    a = io.config_hash({"x": 1, "y": [1, 2]})
    assert a == io.config_hash({"y": [1, 2], "x": 1})
    assert a != io.config_hash({"x": 2, "y": [1, 2]})


def test_dumps_numpy():
    out = json.loads(io.dumps({"a": np.int64(3), "b": np.arange(2), "c": (1, 2)}))
    assert out == {"a": 3, "b": [0, 1], "c": [1, 2]}
