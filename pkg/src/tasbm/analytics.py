"""Closed-form expected motif counts and count variances under a fitted block model.

Every formula sums over assignments of motif slots to combined node states
(out-state, in-state). An assignment contributes the number of ways to place
distinct nodes of those states on the slots, times the expected number of
edges each motif edge needs, times the probability that independent edge
times fall in the motif's order.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .fitting import TasbmModel
from .motifs import TemporalMotif, catalog_36, motif_name

INT64_MAX = 2**63 - 1


class UnsupportedConfiguration(ValueError):
    """The requested quantity has no implemented formula for this configuration."""


def falling_factorial(n: int, k: int):
    """``P(n, k) = n (n-1) ... (n-k+1)``; 0 when ``k > n``.

    Exact integer while it fits in 64 bits, float beyond that.
    """
    if k < 0 or n < 0:
        raise ValueError("n and k must be non-negative")
    if k > n:
        return 0
    out = 1
    for i in range(k):
        out *= n - i
        if out > INT64_MAX:
            return float(out) * math.prod(float(n - j) for j in range(i + 1, k))
    return out


permutations_count = falling_factorial


@dataclass(frozen=True)
class RateSchedule:
    """Piecewise-constant multiplier on every rate over a window.

    Piece ``i`` lasts ``durations[i]`` time units and scales rates by
    ``scales[i]``. Durations must add up to the window length where used.
    """

    durations: tuple
    scales: tuple

    def __post_init__(self):
        if len(self.durations) != len(self.scales) or not self.durations:
            raise ValueError("durations and scales must be non-empty and of equal length")
        if any(d < 0 for d in self.durations) or any(s < 0 for s in self.scales):
            raise ValueError("durations and scales must be non-negative")
        object.__setattr__(self, "durations", tuple(self.durations))
        object.__setattr__(self, "scales", tuple(self.scales))

    @property
    def length(self):
        return sum(self.durations)

    def mass(self, duration=None) -> float:
        """Integral of the multiplier over ``[0, duration]``."""
        if duration is None:
            duration = self.length
        total, start = 0.0, 0.0
        for d, s in zip(self.durations, self.scales):
            total += s * max(0.0, min(d, duration - start))
            start += d
        return total

    def is_constant(self) -> bool:
        return len(set(s for s, d in zip(self.scales, self.durations) if d > 0)) <= 1


@dataclass(frozen=True)
class AnalysisConfig:
    delta: float
    T: float
    t0: int = 0
    schedule: Optional[RateSchedule] = None

    def __post_init__(self):
        if not self.delta > 0 or not self.T > 0:
            raise ValueError("delta and T must be positive")


@dataclass(frozen=True)
class ExpectationResult:
    motif: str
    window: tuple
    expected: float
    variance: Optional[float] = None


class _TermCounter:
    """Number of assignment terms evaluated, for complexity checks."""

    def __init__(self):
        self.terms = 0


assignment_terms = _TermCounter()


def expected_edges(model: TasbmModel, out_state: int, in_state: int, duration,
                   schedule: Optional[RateSchedule] = None) -> float:
    if not (0 <= out_state < model.C_out and 0 <= in_state < model.C_in):
        raise ValueError(f"unknown state pair ({out_state}, {in_state})")
    if duration < 0:
        raise ValueError("duration must be non-negative")
    integral = duration if schedule is None else schedule.mass(duration)
    return float(model.theta[out_state, in_state]) * integral


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def ordering_probability(z: int, schedule=None) -> float:
    """Probability that ``z`` independent edge times come out in a fixed order.

    ``schedule`` is None (constant rates), one :class:`RateSchedule` shared by
    all edges, or a list of ``z`` schedules over the same pieces, one per edge
    in temporal order. Each edge's time has density proportional to its
    schedule. Exact rational arithmetic over the pieces.
    """
    if z < 1:
        raise ValueError("z must be at least 1")
    if z == 1:
        return 1.0
    if schedule is None:
        return 1.0 / math.factorial(z)
    scheds = list(schedule) if isinstance(schedule, (list, tuple)) else [schedule] * z
    if len(scheds) != z:
        raise ValueError("need one schedule per edge")
    lengths = [_as_fraction(d) for d in scheds[0].durations]
    if any(len(s.durations) != len(lengths) or [_as_fraction(d) for d in s.durations] != lengths for s in scheds):
        raise ValueError("per-edge schedules must share their piece boundaries")
    dens = []
    for s in scheds:
        sc = [_as_fraction(x) for x in s.scales]
        mass = sum(a * b for a, b in zip(sc, lengths))
        if mass == 0:
            raise ValueError("an edge schedule has zero total mass")
        dens.append([a / mass for a in sc])
    # A[i]: probability the first i edges are ordered and all fall in pieces seen so far
    A = [Fraction(1)] + [Fraction(0)] * z
    for p, L in enumerate(lengths):
        nxt = [Fraction(0)] * (z + 1)
        for j in range(z + 1):
            if A[j] == 0:
                continue
            prod = Fraction(1)
            for i in range(j, z + 1):
                if i > j:
                    prod *= dens[i - 1][p] * L / (i - j)
                nxt[i] += A[j] * prod
        A = nxt
    return float(A[z])


def _combined_states(model: TasbmModel):
    out_of = np.repeat(np.arange(model.C_out), model.C_in)
    in_of = np.tile(np.arange(model.C_in), model.C_out)
    counts = model.joint_counts.reshape(-1).astype(float)
    return out_of, in_of, counts


def _assignment_grid(C: int, k: int):
    grids = np.indices((C,) * k).reshape(k, -1)
    return grids


def _placement(grids: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Ordered selections of distinct nodes matching each slot-state assignment."""
    out = np.ones(grids.shape[1])
    for i in range(grids.shape[0]):
        prior = np.zeros(grids.shape[1])
        for j in range(i):
            prior += grids[j] == grids[i]
        out *= np.maximum(counts[grids[i]] - prior, 0.0)
    return out


def _assignment_sum(model: TasbmModel, k: int, edges: Sequence[tuple], durations: Sequence[float]) -> float:
    """Σ_A placement(A) × Π_e θ[A[a].out, A[b].in] × duration_e over all C^k assignments."""
    out_of, in_of, counts = _combined_states(model)
    C = len(counts)
    grids = _assignment_grid(C, k)
    assignment_terms.terms += grids.shape[1]
    term = _placement(grids, counts)
    for (a, b), dur in zip(edges, durations):
        term = term * (model.theta[out_of[grids[a]], in_of[grids[b]]] * dur)
    return float(term.sum())


def _check_motif(motif: TemporalMotif) -> None:
    if not isinstance(motif, TemporalMotif):
        raise TypeError("motif must be a TemporalMotif")


def expected_count_T_le_delta(model: TasbmModel, motif: TemporalMotif, config: AnalysisConfig) -> float:
    """Expected δ-instances when the whole window fits in δ, so any ordered edge
    tuple in the window qualifies."""
    _check_motif(motif)
    if config.T > config.delta:
        raise ValueError("this formula needs T <= delta")
    sched = config.schedule
    integral = config.T if sched is None else sched.mass(config.T)
    value = _assignment_sum(model, motif.k, motif.edges, [integral] * motif.z)
    return value * ordering_probability(motif.z, sched)


def expected_count_T_gt_delta(model: TasbmModel, motif: TemporalMotif, config: AnalysisConfig) -> float:
    """Instances inside the last δ of the window, plus those whose first edge
    lands earlier with the rest following within δ."""
    _check_motif(motif)
    if config.T <= config.delta:
        raise ValueError("this formula needs T > delta")
    if config.schedule is not None and not config.schedule.is_constant():
        raise UnsupportedConfiguration("T > delta is only implemented for constant rates")
    scale = 1.0 if config.schedule is None else config.schedule.mass(config.T) / config.T
    delta, T = config.delta, config.T
    tail = expected_count_T_le_delta(model, motif, AnalysisConfig(delta, delta, config.t0)) * scale ** motif.z
    durations = [(T - delta) * scale] + [delta * scale] * (motif.z - 1)
    early = _assignment_sum(model, motif.k, motif.edges, durations) / math.factorial(motif.z - 1)
    return tail + early


def expected_count(model: TasbmModel, motif: TemporalMotif, config: AnalysisConfig) -> float:
    if config.T <= config.delta:
        return expected_count_T_le_delta(model, motif, config)
    return expected_count_T_gt_delta(model, motif, config)


# --- variance ----------------------------------------------------------------

def linear_extensions(q: int, before: Iterable[tuple]) -> int:
    """Number of orderings of ``q`` items respecting ``a before b`` pairs (0 if cyclic).

    Dynamic programming over down-closed subsets.
    """
    pred = [0] * q
    for a, b in before:
        if a == b:
            return 0
        pred[b] |= 1 << a
    ways = [0] * (1 << q)
    ways[0] = 1
    for mask in range(1 << q):
        w = ways[mask]
        if not w:
            continue
        for i in range(q):
            bit = 1 << i
            if not mask & bit and pred[i] & mask == pred[i]:
                ways[mask | bit] += w
    return ways[(1 << q) - 1]


def _partial_injections(left: Sequence, right: Sequence, allowed=lambda a, b: True):
    """All sets of pairs (l, r) matching distinct left items to distinct right items."""
    left = list(left)

    def rec(i, used, acc):
        if i == len(left):
            yield tuple(acc)
            return
        yield from rec(i + 1, used, acc)
        for r in right:
            if r not in used and allowed(left[i], r):
                acc.append((left[i], r))
                yield from rec(i + 1, used | {r}, acc)
                acc.pop()

    yield from rec(0, frozenset(), [])


@lru_cache(maxsize=None)
def _pair_structures(edges: tuple, k: int) -> tuple:
    """Overlap patterns of two instances of one motif.

    Yields ``(union_node_count, union_edges, weight)`` where ``weight`` is
    ``L / q!`` summed over patterns sharing the same union structure.
    """
    z = len(edges)
    acc: dict = {}
    for sigma in _partial_injections(range(k), range(k)):
        map2 = {}
        nxt = k
        matched = {s2: s1 for s1, s2 in sigma}
        for s in range(k):
            if s in matched:
                map2[s] = matched[s]
            else:
                map2[s] = nxt
                nxt += 1
        u = nxt
        e1 = list(edges)
        e2 = [(map2[a], map2[b]) for a, b in edges]
        for eps in _partial_injections(range(z), range(z), lambda i, j: e1[i] == e2[j]):
            shared = {j: i for i, j in eps}
            item2 = {}
            nq = z
            for j in range(z):
                if j in shared:
                    item2[j] = shared[j]
                else:
                    item2[j] = nq
                    nq += 1
            before = [(i, i + 1) for i in range(z - 1)]
            before += [(item2[j], item2[j + 1]) for j in range(z - 1)]
            L = linear_extensions(nq, before)
            if L == 0:
                continue
            union = tuple(sorted(e1 + [e2[j] for j in range(z) if j not in shared]))
            key = (u, union)
            acc[key] = acc.get(key, Fraction(0)) + Fraction(L, math.factorial(nq))
    return tuple((u, union, w) for (u, union), w in sorted(acc.items()))


def _union_sum(model: TasbmModel, u: int, union_edges: tuple, T: float) -> float:
    out_of, in_of, counts = _combined_states(model)
    C = len(counts)
    total = 0.0
    # fix the first union node's state to bound memory
    rest = _assignment_grid(C, u - 1) if u > 1 else np.zeros((0, 1), np.int64)
    assignment_terms.terms += C * rest.shape[1]
    for c0 in range(C):
        grids = np.vstack([np.full((1, rest.shape[1]), c0, np.int64), rest])
        term = _placement(grids, counts)
        for a, b in union_edges:
            term = term * (model.theta[out_of[grids[a]], in_of[grids[b]]] * T)
        total += float(term.sum())
    return total


def second_moment(model: TasbmModel, motif: TemporalMotif, config: AnalysisConfig) -> float:
    """E[N^2]: expected ordered pairs of instances, over every node-overlap and
    shared-edge pattern between the two."""
    _require_variance_regime(config)
    total = 0.0
    for u, union, w in _pair_structures(motif.edges, motif.k):
        total += _union_sum(model, u, union, config.T) * float(w)
    return total


def _require_variance_regime(config: AnalysisConfig) -> None:
    if config.T != config.delta:
        raise UnsupportedConfiguration("variance is only implemented for T == delta")
    if config.schedule is not None and not config.schedule.is_constant():
        raise UnsupportedConfiguration("variance is only implemented for constant rates")
    if config.schedule is not None and config.schedule.scales[0] != 1:
        raise UnsupportedConfiguration("variance expects rates already scaled into the model")


def variance(model: TasbmModel, motif: TemporalMotif, config: AnalysisConfig) -> float:
    _check_motif(motif)
    _require_variance_regime(config)
    mean = expected_count_T_le_delta(model, motif, config)
    var = second_moment(model, motif, config) - mean * mean
    # cancellation can leave tiny negative residues
    return max(var, 0.0)


def variance_supported(config: AnalysisConfig) -> bool:
    try:
        _require_variance_regime(config)
    except UnsupportedConfiguration:
        return False
    return True


def expected_all(model: TasbmModel, catalog=None, config: Optional[AnalysisConfig] = None, delta=None,
                 with_variance: bool = False) -> list[ExpectationResult]:
    if config is None:
        if delta is None:
            raise TypeError("give either config or delta")
        config = AnalysisConfig(delta, model.T, model.t0)
    motifs = [m for _, m in catalog_36()] if catalog is None else [
        m[1] if isinstance(m, tuple) else m for m in catalog]
    window = (int(config.t0), int(config.t0 + config.T))
    want_var = with_variance and variance_supported(config)
    out = []
    for m in motifs:
        e = expected_count(model, m, config)
        v = variance(model, m, config) if want_var else None
        out.append(ExpectationResult(motif_name(m), window, e, v))
    return out


def write_expectations_csv(results: Iterable[ExpectationResult], out: IO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["window_start", "window_end", "motif_label", "expected", "variance"])
    for r in results:
        w.writerow([r.window[0], r.window[1], r.motif, repr(float(r.expected)),
                    "" if r.variance is None else repr(float(r.variance))])


def read_expectations_csv(fh: IO) -> list[ExpectationResult]:
    return [ExpectationResult(row["motif_label"], (int(row["window_start"]), int(row["window_end"])),
                              float(row["expected"]), float(row["variance"]) if row["variance"] else None)
            for row in csv.DictReader(fh)]
