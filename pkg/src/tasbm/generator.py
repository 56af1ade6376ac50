"""Synthetic temporal networks drawn from a block model, with planted anomalies.

Randomness comes from numpy's PCG64 generator seeded with the spec's seed,
so a (spec, seed) pair always yields the same graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import IO, Optional, Sequence

import numpy as np
import yaml

from .fitting import TasbmModel
from .temporal_graph import TemporalGraph

RECIPROCATED = "reciprocated"
REPEATED = "repeated"


@dataclass(frozen=True)
class AnomalyPlan:
    kind: str
    p: float
    lag_min: int
    lag_max: int
    interval: int

    def __post_init__(self):
        if self.kind not in (RECIPROCATED, REPEATED):
            raise ValueError(f"unknown anomaly kind {self.kind!r}")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if not 0 <= self.lag_min <= self.lag_max:
            raise ValueError("need 0 <= lag_min <= lag_max")


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Fixed group sizes (nodes in contiguous id blocks), one rate matrix per
    interval, and interval boundaries ``[b0, b1, ..., bI]``."""

    out_sizes: tuple
    in_sizes: tuple
    thetas: np.ndarray
    boundaries: tuple
    seed: int = 0
    anomalies: tuple = field(default=())

    def __post_init__(self):
        out_sizes = tuple(int(x) for x in self.out_sizes)
        in_sizes = tuple(int(x) for x in self.in_sizes)
        if not out_sizes or not in_sizes or min(out_sizes + in_sizes) <= 0:
            raise ValueError("group sizes must be positive")
        if sum(out_sizes) != sum(in_sizes):
            raise ValueError("out- and in-groups must cover the same nodes")
        bounds = tuple(int(b) for b in self.boundaries)
        if len(bounds) < 2 or any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            raise ValueError("interval boundaries must be strictly increasing")
        thetas = np.array(self.thetas, dtype=float)
        if thetas.ndim == 2:
            thetas = np.repeat(thetas[None], len(bounds) - 1, axis=0)
        if thetas.shape != (len(bounds) - 1, len(out_sizes), len(in_sizes)):
            raise ValueError(f"theta shape {thetas.shape} does not match groups and intervals")
        if not np.all(np.isfinite(thetas)) or np.any(thetas < 0):
            raise ValueError("rates must be finite and non-negative")
        thetas.setflags(write=False)
        object.__setattr__(self, "out_sizes", out_sizes)
        object.__setattr__(self, "in_sizes", in_sizes)
        object.__setattr__(self, "boundaries", bounds)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "anomalies", tuple(self.anomalies))

    @property
    def n(self) -> int:
        return sum(self.out_sizes)

    @property
    def intervals(self) -> list[tuple[int, int]]:
        return list(zip(self.boundaries, self.boundaries[1:]))

    def model(self, interval: int = 0) -> TasbmModel:
        """The block model that generated ``interval``."""
        lo, hi = self.intervals[interval]
        return replace(TasbmModel.from_groups(self.out_sizes, self.in_sizes, self.thetas[interval], hi - lo),
                       t0=lo)


def rate_schedule_scaled(spec: GeneratorSpec, scales: Sequence[float]) -> GeneratorSpec:
    scales = np.asarray(scales, dtype=float)
    if scales.shape != (len(spec.intervals),):
        raise ValueError("need one scale per interval")
    if np.any(scales < 0):
        raise ValueError("scales must be non-negative")
    return replace(spec, thetas=spec.thetas * scales[:, None, None])


def _distinct_times(rng: np.random.Generator, lo: int, hi: int, count: int, taken=None) -> np.ndarray:
    """``count`` distinct integer times in ``[lo, hi)``, redrawing collisions."""
    if count > hi - lo - (0 if taken is None else len(taken)):
        raise ValueError(f"cannot place {count} distinct timestamps in [{lo}, {hi})")
    times = rng.integers(lo, hi, size=count)
    taken = set() if taken is None else set(taken)
    while True:
        seen = set(taken)
        bad = []
        for i, x in enumerate(times.tolist()):
            if x in seen:
                bad.append(i)
            else:
                seen.add(x)
        if not bad:
            return times
        times[bad] = rng.integers(lo, hi, size=len(bad))


def sample_network(spec: GeneratorSpec, seed: Optional[int] = None) -> TemporalGraph:
    """Poisson edge counts per ordered node pair and interval, uniform timestamps.

    Pairs are drawn block by block: the total count for a (out-group,
    in-group) block is Poisson with the summed mean, and each edge picks its
    pair uniformly among the block's pairs of distinct nodes. This has the
    same law as independent per-pair draws.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    out_start = np.concatenate([[0], np.cumsum(spec.out_sizes)])
    in_start = np.concatenate([[0], np.cumsum(spec.in_sizes)])
    srcs, dsts, times = [], [], []
    for k, (lo, hi) in enumerate(spec.intervals):
        L = hi - lo
        s_parts, d_parts = [], []
        for r, nr in enumerate(spec.out_sizes):
            for s, ns in enumerate(spec.in_sizes):
                overlap = max(0, min(out_start[r + 1], in_start[s + 1]) - max(out_start[r], in_start[s]))
                pairs = nr * ns - overlap
                rate = spec.thetas[k, r, s]
                if pairs == 0 or rate == 0:
                    continue
                count = int(rng.poisson(rate * L * pairs))
                u = rng.integers(out_start[r], out_start[r + 1], size=count)
                v = rng.integers(in_start[s], in_start[s + 1], size=count)
                clash = np.flatnonzero(u == v)
                while len(clash):
                    u[clash] = rng.integers(out_start[r], out_start[r + 1], size=len(clash))
                    v[clash] = rng.integers(in_start[s], in_start[s + 1], size=len(clash))
                    clash = clash[u[clash] == v[clash]]
                s_parts.append(u)
                d_parts.append(v)
        if not s_parts:
            continue
        u = np.concatenate(s_parts)
        v = np.concatenate(d_parts)
        srcs.append(u)
        dsts.append(v)
        times.append(_distinct_times(rng, lo, hi, len(u)))
    if not srcs:
        return TemporalGraph.empty(spec.n)
    return TemporalGraph(spec.n, np.concatenate(srcs), np.concatenate(dsts), np.concatenate(times))


def plant_anomalies(graph: TemporalGraph, plan: AnomalyPlan, seed: int,
                    boundaries: Sequence[int]) -> tuple[TemporalGraph, TemporalGraph]:
    """Add a lagged reverse (reciprocated) or duplicate (repeated) edge after each
    base edge of the target interval with probability ``p``.

    Returns the augmented graph and the injected edges on their own.
    """
    if not 0 <= plan.interval < len(boundaries) - 1:
        raise ValueError(f"interval {plan.interval} outside the {len(boundaries) - 1} intervals")
    lo, hi = boundaries[plan.interval], boundaries[plan.interval + 1]
    rng = np.random.default_rng(seed)
    sel = np.flatnonzero((graph.t >= lo) & (graph.t < hi))
    hit = sel[rng.random(len(sel)) < plan.p]
    if plan.kind == RECIPROCATED:
        u, v = graph.dst[hit], graph.src[hit]
    else:
        u, v = graph.src[hit], graph.dst[hit]
    t = graph.t[hit] + rng.integers(plan.lag_min, plan.lag_max + 1, size=len(hit))
    # keep timestamps distinct by redrawing the lag of colliding edges
    taken = set(graph.t.tolist())
    for i in range(len(t)):
        tries = 0
        while int(t[i]) in taken:
            tries += 1
            if tries > 1000:
                raise ValueError("no free timestamp within the lag range")
            t[i] = graph.t[hit[i]] + rng.integers(plan.lag_min, plan.lag_max + 1)
        taken.add(int(t[i]))
    injected = TemporalGraph(graph.n, u, v, t)
    merged = TemporalGraph(graph.n, np.concatenate([graph.src, u]), np.concatenate([graph.dst, v]),
                           np.concatenate([graph.t, t]))
    return merged, injected


def generate(spec: GeneratorSpec) -> tuple[TemporalGraph, TemporalGraph]:
    """Sample the base network and apply the spec's anomaly plans in order."""
    graph = sample_network(spec)
    injected = [TemporalGraph.empty(spec.n)]
    for i, plan in enumerate(spec.anomalies):
        graph, inj = plant_anomalies(graph, plan, spec.seed + 1 + i, spec.boundaries)
        injected.append(inj)
    audit = TemporalGraph(spec.n, np.concatenate([g.src for g in injected]),
                          np.concatenate([g.dst for g in injected]), np.concatenate([g.t for g in injected]))
    return graph, audit


# --- spec files --------------------------------------------------------------

def spec_to_dict(spec: GeneratorSpec) -> dict:
    doc = {
        "seed": int(spec.seed),
        "out_groups": list(spec.out_sizes),
        "in_groups": list(spec.in_sizes),
        "intervals": list(spec.boundaries),
    }
    if all(np.array_equal(spec.thetas[0], th) for th in spec.thetas):
        doc["theta"] = spec.thetas[0].tolist()
    else:
        doc["theta_per_interval"] = spec.thetas.tolist()
    if spec.anomalies:
        doc["anomalies"] = [{"kind": a.kind, "p": float(a.p), "lag": [int(a.lag_min), int(a.lag_max)],
                             "interval": int(a.interval)} for a in spec.anomalies]
    return doc


def spec_from_dict(doc: dict) -> GeneratorSpec:
    try:
        if "theta_per_interval" in doc:
            thetas = doc["theta_per_interval"]
        else:
            thetas = doc["theta"]
        bounds = doc["intervals"]
        if isinstance(bounds, dict):
            bounds = list(range(int(bounds.get("start", 0)),
                                int(bounds.get("start", 0)) + int(bounds["length"]) * int(bounds["count"]) + 1,
                                int(bounds["length"])))
        anomalies = [AnomalyPlan(a["kind"], float(a["p"]), int(a["lag"][0]), int(a["lag"][1]), int(a["interval"]))
                     for a in doc.get("anomalies", [])]
        spec = GeneratorSpec(tuple(doc["out_groups"]), tuple(doc["in_groups"]), thetas, tuple(bounds),
                             int(doc.get("seed", 0)), tuple(anomalies))
    except KeyError as exc:
        raise ValueError(f"generator spec is missing field {exc.args[0]!r}") from None
    if "scales" in doc:
        spec = rate_schedule_scaled(spec, doc["scales"])
    return spec


def load_spec(fh: IO) -> GeneratorSpec:
    doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError("generator spec must be a mapping")
    return spec_from_dict(doc)


def dump_spec(spec: GeneratorSpec, out: IO) -> None:
    yaml.safe_dump(spec_to_dict(spec), out, sort_keys=False, default_flow_style=None, width=100)
