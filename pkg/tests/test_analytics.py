import io
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mc_oracle import block_spec, mean_and_se, motif_ensemble, variance_and_se
from tasbm.analytics import (
    AnalysisConfig,
    RateSchedule,
    UnsupportedConfiguration,
    assignment_terms,
    expected_all,
    expected_count,
    expected_count_T_gt_delta,
    expected_count_T_le_delta,
    expected_edges,
    falling_factorial,
    linear_extensions,
    ordering_probability,
    read_expectations_csv,
    second_moment,
    variance,
    write_expectations_csv,
)
from tasbm.fitting import BucketConfig, TasbmModel, fit_window
from tasbm.generator import GeneratorSpec, sample_network
from tasbm.motifs import TRIANGLE, TemporalMotif, catalog_36, category

CYCLIC = TemporalMotif(((0, 1), (1, 2), (2, 0)))
SINGLE = TemporalMotif(((0, 1),))
CATALOG = [m for _, m in catalog_36()]


def test_cyclic_triangle_exactness():
    model = TasbmModel.uniform(3, 1.0, T=1.0)
    value = expected_count_T_le_delta(model, CYCLIC, AnalysisConfig(1.0, 1.0))
    assert value == pytest.approx(1.0, abs=1e-15)


def test_too_few_nodes_gives_zero():
    model = TasbmModel.uniform(2, 1.0)
    cfg = AnalysisConfig(1.0, 1.0)
    for m in CATALOG:
        value = expected_count(model, m, cfg)
        assert (value == 0) == (m.k == 3)


def test_expected_edges():
    model = TasbmModel.uniform(4, 1e-3)
    assert expected_edges(model, 0, 0, 1000) == pytest.approx(1.0)
    assert expected_edges(model, 0, 0, 0) == 0
    unit = TasbmModel.uniform(4, 1.0)
    assert expected_edges(unit, 0, 0, 3, RateSchedule((2, 1), (1, 3))) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        expected_edges(model, 1, 0, 1)


def test_falling_factorial():
    assert falling_factorial(5, 3) == 60 == math.perm(5, 3)
    assert falling_factorial(2, 3) == 0
    assert falling_factorial(7, 0) == 1
    big = falling_factorial(10**7, 3)
    assert isinstance(big, float) and big == pytest.approx(math.perm(10**7, 3), rel=1e-12)


def test_ordering_probability_constant():
    assert ordering_probability(3) == pytest.approx(1 / 6)
    sched = RateSchedule((1, 2, 3), (0.5, 4.0, 1.0))
    assert ordering_probability(1, sched) == 1.0
    # a constant multiplier spread over several pieces changes nothing
    assert ordering_probability(3, RateSchedule((1, 1, 1), (2, 2, 2))) == pytest.approx(1 / 6, abs=1e-15)


@pytest.mark.parametrize("p", [0.1, 0.5, 0.8])
def test_ordering_probability_two_pieces(p):
    sched = RateSchedule((1, 1), (p, 1 - p))
    closed = p * p / 2 + p * (1 - p) + (1 - p) ** 2 / 2
    assert ordering_probability(2, sched) == pytest.approx(closed, abs=1e-15)
    # Monte Carlo over 10^6 timestamp pairs drawn from the piecewise density
    rng = np.random.default_rng(7)
    N = 10**6
    first = rng.random((2, N)) < p
    t = rng.random((2, N)) + np.where(first, 0.0, 1.0)
    hits = np.mean(t[0] < t[1])
    assert abs(hits - closed) < 3 * math.sqrt(closed * (1 - closed) / N)


schedules = st.lists(st.tuples(st.integers(1, 5), st.integers(0, 6)), min_size=1, max_size=4)


@given(schedules, st.integers(1, 4), st.data())
@settings(max_examples=60, deadline=None)
def test_ordering_over_all_permutations_sums_to_one(pieces, z, data):
    durations = tuple(d for d, _ in pieces)
    per_edge = []
    for _ in range(z):
        scales = data.draw(st.lists(st.integers(0, 6), min_size=len(durations), max_size=len(durations)))
        if sum(scales) == 0:
            scales[0] = 1
        per_edge.append(RateSchedule(durations, tuple(Fraction(s) for s in scales)))
    total = sum(ordering_probability(z, [per_edge[i] for i in perm]) for perm in itertools.permutations(range(z)))
    assert total == pytest.approx(1.0, abs=1e-12)


def random_model(rng, n_out, n_in, n):
    out_sizes = rng.multinomial(n - n_out, [1 / n_out] * n_out) + 1
    in_sizes = rng.multinomial(n - n_in, [1 / n_in] * n_in) + 1
    theta = rng.random((n_out, n_in))
    return TasbmModel.from_groups(out_sizes, in_sizes, theta)


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
@settings(max_examples=40, deadline=None)
def test_rate_scaling_law(seed, s):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 2, 2, 6)
    cfg = AnalysisConfig(2.0, 1.5)
    scaled = model.with_theta(model.theta * s)
    for m in CATALOG[::3]:
        base = expected_count(model, m, cfg)
        assert expected_count(scaled, m, cfg) == pytest.approx(base * s ** m.z, rel=1e-9)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_equal_rates_collapse_to_one_state(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 3, 2, 7)
    rate = float(rng.random())
    model = model.with_theta(np.full(model.theta.shape, rate))
    single = TasbmModel.uniform(7, rate)
    for cfg in (AnalysisConfig(1.0, 1.0), AnalysisConfig(1.0, 2.5)):
        for m in CATALOG:
            assert expected_count(model, m, cfg) == pytest.approx(expected_count(single, m, cfg), rel=1e-9)


def test_small_states_contribute_nothing():
    # state 0 has one node; rates only within state 0 -> no room for any motif
    model = TasbmModel(np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[1, 0], [0, 4]]))
    cfg = AnalysisConfig(1.0, 1.0)
    assert all(expected_count(model, m, cfg) == 0 for m in CATALOG)


def test_assignment_terms_independent_of_graph_size():
    def fitted(n, rate):
        spec = GeneratorSpec((n // 2, n - n // 2), (n,), [[rate], [10 * rate]], (0, 100_000), 1)
        return fit_window(sample_network(spec).view(0, 100_000), BucketConfig.natural_breaks(2))

    for model in (fitted(20, 1e-6), fitted(200, 1e-7)):
        C = model.C_out * model.C_in
        for m in (CYCLIC, SINGLE, TemporalMotif(((0, 1), (1, 0)))):
            before = assignment_terms.terms
            expected_count(model, m, AnalysisConfig(100_000, 100_000))
            assert assignment_terms.terms - before == C ** m.k


def test_zero_rates_and_single_state_symmetry():
    zero = TasbmModel.uniform(6, 0.0)
    assert all(r.expected == 0 for r in expected_all(zero, delta=1.0))
    model = TasbmModel.uniform(6, 0.2, T=3.0)
    res = expected_all(model, delta=3.0)
    by_label = dict(zip((str(l) for l, _ in catalog_36()), res))
    tri = {round(by_label[str(l)].expected, 12) for l, m in catalog_36() if category(m) == TRIANGLE}
    assert len(tri) == 1


def test_expected_all_matches_single_calls():
    spec = GeneratorSpec((10, 20), (15, 15), [[1e-6, 1e-5], [1e-5, 1e-4]], (0, 100_000), 4)
    model = fit_window(sample_network(spec).view(0, 100_000), BucketConfig.natural_breaks(3))
    for delta in (50_000, 100_000, 200_000):
        cfg = AnalysisConfig(delta, model.T, model.t0)
        for r, m in zip(expected_all(model, delta=delta), CATALOG):
            assert r.expected == expected_count(model, m, cfg)
            assert r.window == (0, 100_000)


def test_regime_guards():
    model = TasbmModel.uniform(4, 0.1)
    with pytest.raises(ValueError):
        expected_count_T_le_delta(model, CYCLIC, AnalysisConfig(1.0, 2.0))
    with pytest.raises(ValueError):
        expected_count_T_gt_delta(model, CYCLIC, AnalysisConfig(2.0, 1.0))
    with pytest.raises(ValueError):
        AnalysisConfig(0, 1)
    uneven = AnalysisConfig(1.0, 2.0, schedule=RateSchedule((1, 1), (1, 2)))
    with pytest.raises(UnsupportedConfiguration):
        expected_count(model, CYCLIC, uneven)


def test_continuity_at_window_equals_delta():
    model = TasbmModel.uniform(5, 0.3)
    T = 1.0
    at = expected_count_T_le_delta(model, CYCLIC, AnalysisConfig(T, T))
    above = expected_count_T_gt_delta(model, CYCLIC, AnalysisConfig(T * (1 - 1e-12), T))
    assert above == pytest.approx(at, rel=1e-9)


def test_delta_sweep_has_no_jumps():
    model = TasbmModel.uniform(5, 0.3)
    deltas = np.linspace(0.5, 1.0, 201)
    for m in CATALOG[::4]:
        values = np.array([expected_count(model, m, AnalysisConfig(d, 1.0)) for d in deltas])
        steps = np.abs(np.diff(values))
        assert steps.max() < 3 * steps.mean()
        assert np.all(np.diff(values) >= -1e-12)


def test_window_twice_delta_matches_simulation():
    # ticks stand in for continuous time: 10^6 per window keeps ties negligible
    T, delta, rate = 1_000_000, 500_000, 1.0 / 500_000
    model = TasbmModel.uniform(3, rate, T=T)
    analytic = expected_count(model, CYCLIC, AnalysisConfig(delta, T))
    assert analytic == pytest.approx(1.0 + 3.0)
    counts = motif_ensemble(block_spec((3,), (3,), [[rate]], T), CYCLIC, delta, range(10_000))
    mean, se = mean_and_se(counts)
    assert abs(mean - analytic) < 3 * se


def test_single_edge_variance_is_poisson():
    for n, rate in ((5, 0.3), (2, 1.7), (9, 0.01)):
        model = TasbmModel.uniform(n, rate)
        cfg = AnalysisConfig(1.0, 1.0)
        mean = expected_count(model, SINGLE, cfg)
        assert mean == pytest.approx(n * (n - 1) * rate)
        assert variance(model, SINGLE, cfg) == pytest.approx(mean, rel=1e-12)


def test_rare_event_variance_ratio():
    cfg = AnalysisConfig(1.0, 1.0)
    for m in (CYCLIC, CATALOG[0], CATALOG[20]):
        ratios = [variance(TasbmModel.uniform(5, r), m, cfg) / expected_count(TasbmModel.uniform(5, r), m, cfg)
                  for r in (1e-2, 1e-4, 1e-6)]
        assert abs(ratios[-1] - 1) < 1e-3
        assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15, deadline=None)
def test_variance_non_negative(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, 2, 2, 5)
    cfg = AnalysisConfig(1.0, 1.0)
    for m in CATALOG[::5]:
        mean = expected_count(model, m, cfg)
        assert variance(model, m, cfg) >= 0
        assert second_moment(model, m, cfg) >= mean * mean * (1 - 1e-12)


def test_variance_regime():
    model = TasbmModel.uniform(4, 0.1)
    with pytest.raises(UnsupportedConfiguration):
        variance(model, CYCLIC, AnalysisConfig(2.0, 1.0))
    with pytest.raises(UnsupportedConfiguration):
        variance(model, CYCLIC, AnalysisConfig(1.0, 2.0))
    with pytest.raises(UnsupportedConfiguration):
        variance(model, CYCLIC, AnalysisConfig(2.0, 2.0, schedule=RateSchedule((1, 1), (1, 2))))
    assert all(r.variance is None for r in expected_all(model, config=AnalysisConfig(2.0, 1.0), with_variance=True))


def test_cyclic_triangle_variance_matches_simulation():
    T, rate = 1_000_000, 0.5 / 1_000_000
    model = TasbmModel.uniform(4, rate, T=T)
    cfg = AnalysisConfig(T, T)
    analytic = variance(model, CYCLIC, cfg)
    assert analytic == pytest.approx(1.375)
    counts = motif_ensemble(block_spec((4,), (4,), [[rate]], T), CYCLIC, T, range(20_000))
    sample, se = variance_and_se(counts)
    assert abs(sample - analytic) < 3 * se


@given(st.integers(1, 6), st.sets(st.tuples(st.integers(0, 5), st.integers(0, 5)), max_size=8))
def test_linear_extensions_brute_force(q, pairs):
    pairs = [(a, b) for a, b in pairs if a < q and b < q]
    brute = sum(all(p.index(a) < p.index(b) for a, b in pairs) for p in itertools.permutations(range(q)))
    assert linear_extensions(q, pairs) == brute


def test_expectations_csv_round_trip():
    model = TasbmModel.uniform(4, 0.1, T=10.0, t0=20)
    rows = expected_all(model, config=AnalysisConfig(10.0, 10.0, 20), with_variance=True)
    buf = io.StringIO()
    write_expectations_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "window_start,window_end,motif_label,expected,variance"
    assert read_expectations_csv(io.StringIO(buf.getvalue())) == rows
    rows = expected_all(model, delta=5.0)
    buf = io.StringIO()
    write_expectations_csv(rows, buf)
    assert buf.getvalue().splitlines()[1].endswith(",")
    assert read_expectations_csv(io.StringIO(buf.getvalue())) == rows
