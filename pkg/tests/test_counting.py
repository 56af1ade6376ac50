import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tasbm.counting import (
    CountResult,
    count_all,
    count_instances,
    enumerate_catalog_counts,
    fast_catalog_counts,
    read_counts_csv,
    write_counts_csv,
)
from tasbm.motifs import TemporalMotif, catalog_36, is_delta_instance
from tasbm.temporal_graph import TemporalGraph

CYCLIC = TemporalMotif(((0, 1), (1, 2), (2, 0)))
CATALOG = [m for _, m in catalog_36()]


def brute_force(edges, motif, delta):
    """Every ordered z-tuple of distinct edges, checked one by one."""
    return sum(is_delta_instance(combo, motif, delta) for combo in itertools.permutations(edges, motif.z))


def graph(edges, n=None):
    return TemporalGraph.from_edges(edges, n=n)


def test_empty_window():
    g = TemporalGraph.empty(3)
    assert count_instances(g, CYCLIC, 5).count == 0
    assert all(r.count == 0 for r in count_all(g, delta=5))


def test_single_cyclic_triangle():
    g = graph([(0, 1, 1), (1, 2, 2), (2, 0, 3)])
    assert count_instances(g, CYCLIC, 5).count == 1
    assert brute_force(g.edges, CYCLIC, 5) == 1


def test_repeated_edge_window():
    g = graph([(0, 1, 1), (0, 1, 2), (0, 1, 3)])
    motif = TemporalMotif(((0, 1), (0, 1), (0, 1)))
    assert count_instances(g, motif, 2).count == 1
    assert count_instances(g, motif, 1).count == 0


def test_one_edge_gives_zero_everywhere():
    res = count_all(graph([(0, 1, 4)]), delta=10)
    assert len(res) == 36 and all(r.count == 0 for r in res)


def test_alternating_pair_hits_one_two_node_motif():
    res = count_all(graph([(0, 1, 1), (1, 0, 2), (0, 1, 3)]), delta=10)
    hits = {r.motif: r.count for r in res if r.count}
    assert len(hits) == 1
    (label, value), = hits.items()
    assert value == 1
    assert dict((str(lab), m) for lab, m in catalog_36())[label].edges == ((0, 1), (1, 0), (0, 1))


def test_ties_never_form_instances():
    g = graph([(0, 1, 5), (1, 2, 5), (2, 0, 5)])
    assert count_instances(g, CYCLIC, 10).count == 0
    assert fast_catalog_counts(g, 10).get(CYCLIC.canonical(), 0) == 0


def test_self_loops_ignored():
    g = graph([(0, 1, 1), (1, 1, 2), (1, 2, 3), (2, 0, 4)])
    assert count_instances(g, CYCLIC, 10).count == 1
    assert {r.motif: r.count for r in count_all(g, delta=10)}["A4"] == 1


def test_larger_motif_falls_back_to_dfs():
    path = TemporalMotif(((0, 1), (1, 2), (2, 3)))
    g = graph([(0, 1, 1), (1, 2, 2), (2, 3, 3), (1, 4, 4)])
    res = count_all(g, [path], delta=10)
    assert res[0].count == 1 == brute_force(g.edges, path, 10)


def test_delta_must_be_positive():
    with pytest.raises(ValueError):
        count_instances(graph([(0, 1, 1)]), CYCLIC, 0)
    with pytest.raises(TypeError):
        count_all(graph([(0, 1, 1)]))


def test_overflow_is_reported():
    # 4 million edges inside one horizon: the ordered-triple bound passes 2^63
    m = 4_000_000
    t = np.arange(m, dtype=np.int64)
    g = TemporalGraph(2, np.zeros(m, np.int64), np.ones(m, np.int64), t)
    with pytest.raises(OverflowError):
        count_all(g, delta=m)


small_windows = st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 12)),
                         min_size=0, max_size=11)


@given(small_windows, st.integers(1, 12))
@settings(max_examples=150, deadline=None)
def test_all_routes_agree_with_brute_force(edges, delta):
    g = graph(edges, n=5)
    fast = {r.motif: r.count for r in count_all(g, delta=delta, method="fast")}
    enum = {r.motif: r.count for r in count_all(g, delta=delta, method="enumerate")}
    assert fast == enum
    clean = [e for e in g.edges if e.src != e.dst]
    for (lab, m) in catalog_36():
        assert fast[str(lab)] == count_instances(g, m, delta).count
    for lab, m in catalog_36()[::5]:
        assert fast[str(lab)] == brute_force(clean, m, delta)


def random_window(rng, m=50, n=6, span=60):
    return TemporalGraph(n, rng.integers(0, n, m), rng.integers(0, n, m), rng.integers(0, span, m))


def test_fast_matches_dfs_on_random_windows():
    rng = np.random.default_rng(11)
    for _ in range(40):
        g = random_window(rng)
        delta = int(rng.integers(1, 40))
        fast = count_all(g, delta=delta)
        for r, m in zip(fast, CATALOG):
            assert r.count == count_instances(g, m, delta).count


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_delta_monotone_and_relabel_invariant(seed):
    rng = np.random.default_rng(seed)
    g = random_window(rng)
    d1, d2 = sorted(rng.integers(1, 60, 2))
    small = [r.count for r in count_all(g, delta=int(d1))]
    large = [r.count for r in count_all(g, delta=int(d2))]
    assert all(a <= b for a, b in zip(small, large))
    perm = rng.permutation(g.n)
    relabeled = [r.count for r in count_all(g.relabel(perm), delta=int(d2))]
    assert relabeled == large


def test_window_view_counts_only_its_edges():
    g = graph([(0, 1, 1), (1, 2, 2), (2, 0, 3), (0, 1, 11), (1, 2, 12), (2, 0, 13)])
    w = g.view(10, 10)
    r = count_instances(w, CYCLIC, 100)
    assert r.count == 1 and r.interval == (10, 20)


def test_csv_round_trip():
    rows = [CountResult("A4", (0, 10), 3), CountResult("C3", (0, 10), 0)]
    buf = io.StringIO()
    write_counts_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "window_start,window_end,motif_label,count"
    assert read_counts_csv(io.StringIO(buf.getvalue())) == rows


def test_enumeration_keys_are_canonical():
    counts = enumerate_catalog_counts(graph([(5, 6, 1), (6, 7, 2), (7, 5, 3)]), 10)
    assert dict(counts) == {CYCLIC.canonical(): 1}
