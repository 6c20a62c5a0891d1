import numpy as np
import pytest

from causalpatterns.errors import ValidationError
from causalpatterns.graph import (
    EdgeEvents,
    load_edge_events,
    load_edge_list,
    load_id_map,
    save_id_map,
    write_edge_list,
)

from conftest import graph_from_pairs


def test_load_simple_undirected(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\nb,c\n"))
    assert g.num_nodes == 3
    assert g.node_ids == ("a", "b", "c")
    assert {tuple(e) for e in g.edges.tolist()} == {(0, 1), (1, 2)}
    assert np.allclose(g.weights, [1.0, 1.0])
    assert not g.directed


def test_duplicate_orientations_merge(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\nb,a\n"))
    assert g.num_edges == 1
    assert tuple(g.edges[0]) == (0, 1)
    assert g.weights[0] == 2.0


def test_self_loop_rejected(tmp_csv):
    with pytest.raises(ValidationError, match="self-loop"):
        load_edge_list(tmp_csv("g.csv", "src,dst\na,a\n"))


def test_nonpositive_weight_rejected(tmp_csv):
    with pytest.raises(ValidationError, match="weight"):
        load_edge_list(tmp_csv("g.csv", "src,dst,weight\na,b,0\n"))
    with pytest.raises(ValidationError, match="weight"):
        load_edge_list(tmp_csv("g.csv", "src,dst,weight\na,b,-2\n"))


def test_parse_error_reports_line(tmp_csv):
    with pytest.raises(ValidationError, match="line"):
        load_edge_list(tmp_csv("g.csv", "src,dst,weight\na,b,1\nc\n"))


def test_bad_header_rejected(tmp_csv):
    with pytest.raises(ValidationError, match="header"):
        load_edge_list(tmp_csv("g.csv", "from,to\na,b\n"))


def test_comments_and_weights(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst,weight\n# comment\na,b,2.5\n"))
    assert g.weights[0] == 2.5


def test_directed_keeps_orientation(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\nb,a\n"), directed=True)
    assert tuple(g.edges[0]) == (0, 1)
    assert g.node_ids == ("b", "a")
    assert g.has_edge(0, 1)
    assert not g.has_edge(1, 0)


def test_undirected_adjacency_symmetric(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\nc,a\n"))
    for s, d in g.edges.tolist():
        assert g.has_edge(s, d) and g.has_edge(d, s)
    adj = g.adjacency()
    assert np.array_equal(adj, adj.T)


def test_round_trip_identity(tmp_path):
    rng = np.random.default_rng(11)
    for trial in range(20):
        directed = bool(rng.integers(2))
        n = int(rng.integers(2, 12))
        lines = ["src,dst,weight"]
        seen = set()
        while len(seen) < min(12, n * (n - 1) // 2):
            s, d = rng.integers(0, n, size=2).tolist()
            if s != d and (s, d) not in seen:
                seen.add((s, d))
                lines.append(f"m{s},m{d},{float(rng.integers(1, 9))}")
        src = tmp_path / f"src{trial}.csv"
        src.write_text("\n".join(lines) + "\n", encoding="utf-8")
        g = load_edge_list(src, directed=directed)
        out = tmp_path / f"g{trial}.csv"
        write_edge_list(g, out)
        back = load_edge_list(out, directed=directed)
        assert back.node_ids == g.node_ids
        assert np.array_equal(back.edges, g.edges)
        assert np.array_equal(back.weights, g.weights)
        assert back.directed == g.directed


def test_round_trip_exact_after_load(tmp_csv, tmp_path):
    g = load_edge_list(tmp_csv("g.csv", "src,dst,weight\nc,a,1.5\na,b,2\nb,c,0.25\n"))
    out = tmp_path / "round.csv"
    write_edge_list(g, out)
    back = load_edge_list(out)
    assert back.node_ids == g.node_ids
    assert np.array_equal(back.edges, g.edges)
    assert np.array_equal(back.weights, g.weights)
    assert back.directed == g.directed


def test_id_map_round_trip(tmp_csv, tmp_path):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\nx,y\ny,z\n"))
    save_id_map(g, tmp_path / "ids.json")
    assert load_id_map(tmp_path / "ids.json") == ("x", "y", "z")


def test_events_basic(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\n"))
    ev = load_edge_events(tmp_csv("e.csv", "src,dst,t\na,b,0\na,b,2\n"), g, num_steps=3)
    assert isinstance(ev, EdgeEvents)
    assert {tuple(e) for e in ev.events.tolist()} == {(0, 1, 0), (0, 1, 2)}


def test_events_empty_file(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\n"))
    ev = load_edge_events(tmp_csv("e.csv", "src,dst,t\n"), g, num_steps=3)
    assert ev.num_events == 0


def test_events_duplicates_collapse(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\n"))
    ev = load_edge_events(tmp_csv("e.csv", "src,dst,t\na,b,1\nb,a,1\n"), g, num_steps=3)
    assert ev.num_events == 1
    assert tuple(ev.events[0]) == (0, 1, 1)


def test_events_step_out_of_range(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\n"))
    with pytest.raises(ValidationError, match="outside"):
        load_edge_events(tmp_csv("e.csv", "src,dst,t\na,b,5\n"), g, num_steps=3)


def test_events_unknown_node(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\n"))
    with pytest.raises(ValidationError, match="unknown node"):
        load_edge_events(tmp_csv("e.csv", "src,dst,t\na,z,0\n"), g, num_steps=3)


def test_events_non_edge(tmp_csv):
    g = load_edge_list(tmp_csv("g.csv", "src,dst\na,b\nb,c\n"))
    with pytest.raises(ValidationError, match="not an edge"):
        load_edge_events(tmp_csv("e.csv", "src,dst,t\na,c,0\n"), g, num_steps=3)


def test_missing_file():
    with pytest.raises(ValidationError, match="not found"):
        load_edge_list("/nonexistent/g.csv")
