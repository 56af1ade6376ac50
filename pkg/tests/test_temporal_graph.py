import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tasbm.temporal_graph import (
    ParseError,
    TemporalGraph,
    degrees,
    excise_days,
    parse_edge_list,
    preprocess,
    window_slices,
    write_edge_list,
)

edge_lists = st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20), st.integers(0, 1000)), max_size=60)


def test_empty_stream():
    g = parse_edge_list("")
    assert (g.n, g.m) == (0, 0)


def test_edges_sorted_by_time():
    g = parse_edge_list("0 1 5\n1 2 3\n")
    assert g.n == 3 and g.m == 2
    # ids compacted by first appearance: 0->0, 1->1, 2->2
    assert [tuple(e) for e in g.edges] == [(1, 2, 3), (0, 1, 5)]


def test_duplicate_timestamps_kept_in_input_order():
    g = parse_edge_list("0 1 7\n2 3 7\n0 1 7\n")
    assert g.m == 3
    assert [tuple(e) for e in g.edges] == [(0, 1, 7), (2, 3, 7), (0, 1, 7)]


def test_ids_compacted_with_map():
    g, ids = parse_edge_list("# comment\n100 7 2\n7 55 1\n", return_id_map=True)
    assert ids == {100: 0, 7: 1, 55: 2}
    assert g.n == 3
    assert [tuple(e) for e in g.edges] == [(1, 2, 1), (0, 1, 2)]


def test_bytes_and_file_objects():
    assert parse_edge_list(b"0 1 1\n").m == 1
    assert parse_edge_list(io.BytesIO(b"0 1 1\n1 0 2\n")).m == 2


@pytest.mark.parametrize("text, line", [
    ("0 1 2\n0 1\n", 2),
    ("0 1 x\n", 1),
    ("0 1 2\n\n0 1 -4\n", 3),
    ("-1 1 2\n", 1),
])
def test_malformed_lines_report_line_number(text, line):
    with pytest.raises(ParseError) as err:
        parse_edge_list(text)
    assert err.value.lineno == line


@given(edge_lists)
def test_round_trip_is_canonical(edges):
    text = "".join(f"{u} {v} {t}\n" for u, v, t in edges)
    g, ids = parse_edge_list(text, return_id_map=True)
    buf = io.StringIO()
    write_edge_list(g, buf)
    expected = sorted(((ids[u], ids[v], t) for u, v, t in edges), key=lambda e: e[2])
    assert buf.getvalue() == "".join(f"{u} {v} {t}\n" for u, v, t in expected)


def test_graph_rejects_out_of_range_ids():
    with pytest.raises(ValueError):
        TemporalGraph(2, [0], [2], [1])


def test_preprocess_identity_drops_self_loops():
    g = TemporalGraph.from_edges([(0, 1, 1), (1, 1, 2), (1, 2, 3)])
    out = preprocess(g)
    assert [tuple(e) for e in out.edges] == [(0, 1, 1), (1, 2, 3)]


def test_preprocess_degree_threshold_on_star():
    # hub 0 with 100 leaf edges, plus a heavy pair among nodes 101, 102
    edges = [(0, i, i) for i in range(1, 101)] + [(101, 102, 200 + i) for i in range(20)]
    g = TemporalGraph.from_edges(edges)
    deg = degrees(g)
    assert deg[0] == 100 and deg[1] == 1
    out = preprocess(g, degree_fraction=0.1)
    kept = set(out.src.tolist()) | set(out.dst.tolist())
    assert kept == {101, 102}
    assert all(deg[u] >= 10 and deg[v] >= 10 for u, v, _ in out.edges)


def test_preprocess_largest_component():
    five = [(0, 1, 1), (1, 2, 2), (2, 3, 3), (3, 4, 4)]
    three = [(5, 6, 5), (6, 7, 6), (7, 5, 7)]
    out = preprocess(TemporalGraph.from_edges(five + three), keep_largest_component=True)
    assert set(out.src.tolist()) | set(out.dst.tolist()) == {0, 1, 2, 3, 4}


@given(edge_lists, st.floats(0, 1), st.booleans())
def test_preprocess_only_removes(edges, frac, lcc):
    g = TemporalGraph.from_edges(edges, n=21)
    out = preprocess(g, frac, lcc)
    before = {tuple(e) for e in g.edges}
    assert {tuple(e) for e in out.edges} <= before
    assert np.all(out.src != out.dst)


def test_windows_even_split():
    g = TemporalGraph.from_edges([(0, 1, t) for t in range(100)])
    ws = window_slices(g, 25, origin=0)
    assert [w.interval for w in ws] == [(0, 25), (25, 50), (50, 75), (75, 100)]
    assert [w.m for w in ws] == [25] * 4


def test_single_partial_window():
    g = TemporalGraph.from_edges([(0, 1, t) for t in range(10)])
    ws = window_slices(g, 25, origin=0)
    assert len(ws) == 1 and ws[0].m == 10


def test_half_open_boundary():
    g = TemporalGraph.from_edges([(0, 1, 3), (1, 0, 25)])
    ws = window_slices(g, 25, origin=0)
    assert [list(w.t) for w in ws] == [[3], [25]]


def test_window_errors():
    g = TemporalGraph.from_edges([(0, 1, 3)])
    with pytest.raises(ValueError):
        window_slices(g, 0)
    with pytest.raises(ValueError):
        window_slices(g, 5, origin=4)
    with pytest.raises(ValueError):
        window_slices(g, 5, origin=0, end=3)


def test_explicit_end_adds_trailing_empty_windows():
    g = TemporalGraph.from_edges([(0, 1, 3)])
    ws = window_slices(g, 10, origin=0, end=40)
    assert [w.m for w in ws] == [1, 0, 0, 0]


@given(edge_lists, st.integers(1, 300), st.integers(0, 50))
@settings(max_examples=200)
def test_windows_partition_edges(edges, T, back):
    g = TemporalGraph.from_edges(edges, n=21)
    if g.m == 0:
        return
    ws = window_slices(g, T, origin=g.time_span[0] - back)
    assert sum(w.m for w in ws) == g.m
    assert np.array_equal(np.concatenate([w.t for w in ws]), g.t)
    for w in ws:
        assert np.all((w.t >= w.t0) & (w.t < w.t0 + w.T))


def test_excise_weekend():
    day = 86400
    # 1970-01-03 and -04 were Saturday and Sunday
    g = TemporalGraph.from_edges([(0, 1, 1 * day + 5), (0, 1, 2 * day + 5), (0, 1, 3 * day + 5),
                                  (0, 1, 4 * day + 5)])
    out = excise_days(g, [5, 6])
    assert list(out.t) == [1 * day + 5, 2 * day + 5]
    ws = window_slices(g, day, origin=0, skip_weekdays=[5, 6])
    assert [w.m for w in ws] == [0, 1, 1]
