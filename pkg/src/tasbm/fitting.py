"""Fitting activity-state block models to windows of a temporal graph.

A node's out-state is the bucket holding its out-edge rate in the window and
its in-state the bucket holding its in-edge rate. Rates ``theta[r, s]`` are
expected edges per ordered node pair per unit time, from out-state ``r`` to
in-state ``s``.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field, replace
from typing import IO, Optional, Sequence

import numpy as np
import yaml

from .temporal_graph import GraphLike, TemporalGraph, WindowView, window_slices


class _PassCounter:
    def __init__(self):
        self.edge_passes = 0


_active_counters: list = []


@contextlib.contextmanager
def count_edge_passes():
    """Count full scans of window edge arrays made by the fitting code."""
    counter = _PassCounter()
    _active_counters.append(counter)
    try:
        yield counter
    finally:
        _active_counters.remove(counter)


def _edge_pass(window: GraphLike):
    for c in _active_counters:
        c.edge_passes += 1
    src, dst = np.asarray(window.src), np.asarray(window.dst)
    keep = src != dst
    return src[keep], dst[keep]


@dataclass(frozen=True)
class BucketConfig:
    """Rate thresholds partitioning ``[0, inf)`` into initial buckets.

    Bucket ``i`` holds rates in ``[boundaries[i-1], boundaries[i])``, with the
    first bucket starting at 0 and the last one unbounded. The same
    boundaries apply to out- and in-rates unless ``in_boundaries`` is given.
    ``natural`` asks for data-driven boundaries instead: up to that many
    buckets per side, split at the widest gaps between observed log-rates,
    each holding at least ``min_fraction`` of the active nodes, plus a
    separate bucket for idle nodes.
    """

    boundaries: tuple = ()
    in_boundaries: Optional[tuple] = None
    natural: Optional[int] = None
    min_fraction: float = 0.05

    def __post_init__(self):
        for b in (self.boundaries, self.in_boundaries):
            if b is None:
                continue
            arr = np.asarray(b, dtype=float)
            if arr.size and (np.any(np.diff(arr) <= 0) or arr[0] <= 0 or not np.all(np.isfinite(arr))):
                raise ValueError("bucket boundaries must be positive, finite and strictly increasing")
        if self.natural is not None and self.natural < 1:
            raise ValueError("natural bucket count must be at least 1")
        object.__setattr__(self, "boundaries", tuple(float(x) for x in self.boundaries))
        if self.in_boundaries is not None:
            object.__setattr__(self, "in_boundaries", tuple(float(x) for x in self.in_boundaries))

    @classmethod
    def log_decades(cls, low: float, high: float) -> "BucketConfig":
        """Factor-10 boundaries from ``low`` up past ``high``."""
        if not 0 < low:
            raise ValueError("low must be positive")
        high = max(high, low)
        count = int(np.floor(np.log10(high / low) + 1e-9)) + 1
        return cls(tuple(low * 10.0 ** np.arange(count + 1)))

    @classmethod
    def auto(cls, graph: GraphLike, T: float) -> "BucketConfig":
        """Default: factor-10 spacing over ``[1/(n*T_total), max observed rate]``."""
        span = max(1, graph.time_span[1] - graph.time_span[0] + 1) if graph.m else 1
        n = max(1, graph.n)
        deg = np.maximum(np.bincount(graph.src, minlength=n), np.bincount(graph.dst, minlength=n)) if graph.m else [0]
        return cls.log_decades(1.0 / (n * span), max(float(np.max(deg)) / T, 1.0 / (n * span)))

    @classmethod
    def natural_breaks(cls, count: int, min_fraction: float = 0.05) -> "BucketConfig":
        return cls(natural=int(count), min_fraction=min_fraction)

    def resolve(self, out_rates: np.ndarray, in_rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.natural is not None:
            return (_natural_boundaries(out_rates, self.natural, self.min_fraction),
                    _natural_boundaries(in_rates, self.natural, self.min_fraction))
        out_b = np.asarray(self.boundaries, dtype=float)
        in_b = out_b if self.in_boundaries is None else np.asarray(self.in_boundaries, dtype=float)
        return out_b, in_b


def _natural_boundaries(rates: np.ndarray, count: int, min_fraction: float) -> np.ndarray:
    """Split sorted positive log-rates at their widest gaps.

    A gap is skipped when cutting there would leave a bucket with fewer than
    ``min_fraction`` of the active nodes, so isolated tail values cannot
    claim a bucket of their own.
    """
    pos, weight = np.unique(rates[rates > 0], return_counts=True)
    if len(pos) == 0:
        return np.zeros(0)
    bounds = [pos[0] / 2.0]  # idle nodes get their own bucket
    if count > 1 and len(pos) > 1:
        cum = np.concatenate([[0], np.cumsum(weight)])
        min_size = max(1, int(np.ceil(min_fraction * cum[-1])))
        gaps = np.diff(np.log(pos))
        cuts = [0, len(pos)]  # segment edges, as indices into pos
        for g in np.argsort(-gaps, kind="stable"):
            if len(cuts) - 1 == count:
                break
            at = g + 1
            i = int(np.searchsorted(cuts, at))
            lo, hi = cuts[i - 1], cuts[i]
            if cum[at] - cum[lo] >= min_size and cum[hi] - cum[at] >= min_size:
                cuts.insert(i, at)
        inner = np.asarray(cuts[1:-1], dtype=np.int64)
        bounds.extend(np.sqrt(pos[inner - 1] * pos[inner]))
    return np.asarray(bounds)


@dataclass(frozen=True, eq=False)
class TasbmModel:
    """Fitted (or specified) activity-state block model for one window.

    ``joint_counts[r, s]`` is the number of nodes whose out-state is ``r`` and
    in-state ``s``; the analytic formulas only need these counts and
    ``theta``. Per-node memberships are kept when known.
    """

    theta: np.ndarray
    joint_counts: np.ndarray
    T: float = 1.0
    t0: int = 0
    out_state: Optional[np.ndarray] = field(default=None, repr=False)
    in_state: Optional[np.ndarray] = field(default=None, repr=False)
    out_ids: Optional[tuple] = None
    in_ids: Optional[tuple] = None
    out_boundaries: Optional[tuple] = None
    in_boundaries: Optional[tuple] = None

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float, ndmin=2)
        joint = np.array(self.joint_counts, dtype=np.int64, ndmin=2)
        if theta.shape != joint.shape:
            raise ValueError("theta and joint_counts must have the same shape")
        if not np.all(np.isfinite(theta)) or np.any(theta < 0):
            raise ValueError("theta must be finite and non-negative")
        if np.any(joint < 0):
            raise ValueError("member counts must be non-negative")
        if not self.T > 0:
            raise ValueError("window length T must be positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "joint_counts", joint)
        co, ci = theta.shape
        if self.out_ids is None:
            object.__setattr__(self, "out_ids", tuple(range(co)))
        if self.in_ids is None:
            object.__setattr__(self, "in_ids", tuple(range(ci)))

    @classmethod
    def uniform(cls, n: int, rate: float, T: float = 1.0, t0: int = 0) -> "TasbmModel":
        return cls(np.array([[rate]]), np.array([[n]]), T, t0,
                   out_state=np.zeros(n, np.int64), in_state=np.zeros(n, np.int64))

    @classmethod
    def from_groups(cls, out_sizes: Sequence[int], in_sizes: Sequence[int], theta, T: float = 1.0,
                    t0: int = 0) -> "TasbmModel":
        """Nodes assigned to out- and in-groups in contiguous id blocks."""
        out_state = np.repeat(np.arange(len(out_sizes)), out_sizes)
        in_state = np.repeat(np.arange(len(in_sizes)), in_sizes)
        if len(out_state) != len(in_state):
            raise ValueError("out- and in-group sizes must cover the same number of nodes")
        joint = np.zeros((len(out_sizes), len(in_sizes)), np.int64)
        np.add.at(joint, (out_state, in_state), 1)
        return cls(np.asarray(theta, float), joint, T, t0, out_state=out_state, in_state=in_state)

    @property
    def n(self) -> int:
        return int(self.joint_counts.sum())

    @property
    def C_out(self) -> int:
        return self.theta.shape[0]

    @property
    def C_in(self) -> int:
        return self.theta.shape[1]

    @property
    def out_counts(self) -> np.ndarray:
        return self.joint_counts.sum(axis=1)

    @property
    def in_counts(self) -> np.ndarray:
        return self.joint_counts.sum(axis=0)

    @property
    def pi_out(self) -> np.ndarray:
        return self.out_counts / max(self.n, 1)

    @property
    def pi_in(self) -> np.ndarray:
        return self.in_counts / max(self.n, 1)

    def members(self, side: str, state: int) -> Optional[np.ndarray]:
        arr = self.out_state if side == "out" else self.in_state
        return None if arr is None else np.flatnonzero(arr == state)

    @property
    def out_states(self) -> list:
        return [(self.out_ids[r], int(c), self.members("out", r)) for r, c in enumerate(self.out_counts)]

    @property
    def in_states(self) -> list:
        return [(self.in_ids[s], int(c), self.members("in", s)) for s, c in enumerate(self.in_counts)]

    def pair_counts(self) -> np.ndarray:
        """Ordered pairs of distinct nodes per (out-state, in-state) cell."""
        return np.outer(self.out_counts, self.in_counts) - self.joint_counts

    def with_theta(self, theta) -> "TasbmModel":
        return replace(self, theta=np.asarray(theta, float))


def _assign(rates: np.ndarray, bounds: np.ndarray):
    bucket = np.searchsorted(bounds, rates, side="right")
    used, state = np.unique(bucket, return_inverse=True)
    return state.astype(np.int64), tuple(int(b) for b in used)


def _memberships(window: GraphLike, buckets: Optional[BucketConfig]):
    T = float(window.T) if hasattr(window, "T") else float(max(1, window.time_span[1] - window.time_span[0] + 1))
    n = window.n
    src, dst = _edge_pass(window)
    out_deg = np.bincount(src, minlength=n)
    in_deg = np.bincount(dst, minlength=n)
    out_rate, in_rate = out_deg / T, in_deg / T
    if buckets is None:
        buckets = BucketConfig.natural_breaks(1)
    out_b, in_b = buckets.resolve(out_rate, in_rate)
    out_state, out_ids = _assign(out_rate, out_b)
    in_state, in_ids = _assign(in_rate, in_b)
    joint = np.zeros((len(out_ids), len(in_ids)), np.int64)
    np.add.at(joint, (out_state, in_state), 1)
    R_out = np.bincount(out_state, weights=out_deg, minlength=len(out_ids))
    R_in = np.bincount(in_state, weights=in_deg, minlength=len(in_ids))
    return T, out_state, in_state, out_ids, in_ids, joint, R_out, R_in, out_b, in_b


def _window_start(window: GraphLike) -> int:
    return int(window.t0) if hasattr(window, "t0") else int(window.time_span[0])


def fit_window_approx(window: GraphLike, buckets: Optional[BucketConfig] = None) -> TasbmModel:
    """One edge pass: degree tallies, bucket assignment, and a rate matrix that
    splits each out-state's edges over in-states in proportion to their
    in-degree totals."""
    T, out_state, in_state, out_ids, in_ids, joint, R_out, R_in, out_b, in_b = _memberships(window, buckets)
    total_in = R_in.sum()
    n_out, n_in = joint.sum(axis=1), joint.sum(axis=0)
    if window.n == 0 or total_in == 0:
        theta = np.zeros(joint.shape)
    else:
        theta = np.outer(R_out, R_in / total_in) / (np.outer(n_out, n_in) * T)
    return TasbmModel(theta, joint, T, _window_start(window), out_state, in_state, out_ids, in_ids,
                      tuple(out_b), tuple(in_b))


def fit_window_exact(window: GraphLike, memberships) -> np.ndarray:
    """Second edge pass: ``m_rs / (pairs_rs * T)`` for fixed memberships.

    ``memberships`` is a :class:`TasbmModel` carrying per-node states or an
    ``(out_state, in_state)`` pair of arrays. ``pairs_rs`` excludes the
    self-pairs of nodes sitting in both ``r`` and ``s``.
    """
    if isinstance(memberships, TasbmModel):
        out_state, in_state = memberships.out_state, memberships.in_state
        T = memberships.T
    else:
        out_state, in_state = memberships
        T = float(window.T) if hasattr(window, "T") else float(window.time_span[1] - window.time_span[0] + 1)
    if out_state is None or in_state is None:
        raise ValueError("exact fit needs per-node memberships")
    out_state = np.asarray(out_state, np.int64)
    in_state = np.asarray(in_state, np.int64)
    if len(out_state) < window.n or len(in_state) < window.n or (len(out_state) and
                                                                   (out_state.min() < 0 or in_state.min() < 0)):
        raise ValueError("memberships must assign a state to every node of the window")
    C_out = int(out_state.max()) + 1 if len(out_state) else 1
    C_in = int(in_state.max()) + 1 if len(in_state) else 1
    src, dst = _edge_pass(window)
    m_rs = np.bincount(out_state[src] * C_in + in_state[dst], minlength=C_out * C_in).reshape(C_out, C_in)
    joint = np.zeros((C_out, C_in), np.int64)
    np.add.at(joint, (out_state, in_state), 1)
    pairs = np.outer(joint.sum(axis=1), joint.sum(axis=0)) - joint
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(pairs > 0, m_rs / (pairs * T), 0.0)
    return theta


def edge_tallies(window: GraphLike, model: TasbmModel) -> np.ndarray:
    """``m_rs``: edges in the window from out-state r to in-state s."""
    src, dst = _edge_pass(window)
    m = np.zeros((model.C_out, model.C_in), np.int64)
    np.add.at(m, (model.out_state[src], model.in_state[dst]), 1)
    return m


def fit_window(window: GraphLike, buckets: Optional[BucketConfig] = None, exact: bool = True) -> TasbmModel:
    model = fit_window_approx(window, buckets)
    if exact:
        model = model.with_theta(fit_window_exact(window, model))
    return model


def fit_series(graph: TemporalGraph, T: int, buckets: Optional[BucketConfig] = None, exact: bool = True,
               origin: Optional[int] = None, skip_weekdays=None, end: Optional[int] = None) -> list[TasbmModel]:
    """Fit every window of length ``T`` independently; memberships may change between windows."""
    windows = window_slices(graph, T, origin=origin, skip_weekdays=skip_weekdays, end=end)
    return [fit_window(w, buckets, exact) for w in windows]


# --- serialization -----------------------------------------------------------

def _listify(a):
    return np.asarray(a).tolist()


def model_to_dict(model: TasbmModel, members: bool = False) -> dict:
    doc = {
        "T": float(model.T),
        "t0": int(model.t0),
        "n": model.n,
        "out_states": [],
        "in_states": [],
        "joint_counts": _listify(model.joint_counts),
        "theta": [[float(x) for x in row] for row in model.theta],
    }
    for side, ids, counts in (("out", model.out_ids, model.out_counts), ("in", model.in_ids, model.in_counts)):
        for r, (sid, c) in enumerate(zip(ids, counts)):
            entry = {"id": int(sid), "count": int(c)}
            mem = model.members(side, r)
            if members and mem is not None:
                entry["members"] = _listify(mem)
            doc[f"{side}_states"].append(entry)
    if model.out_boundaries is not None:
        doc["out_boundaries"] = [float(x) for x in model.out_boundaries]
    if model.in_boundaries is not None:
        doc["in_boundaries"] = [float(x) for x in model.in_boundaries]
    return doc


def model_from_dict(doc: dict) -> TasbmModel:
    joint = np.asarray(doc["joint_counts"], np.int64)
    out_state = in_state = None
    n = int(joint.sum())
    if all("members" in s for s in doc["out_states"]) and all("members" in s for s in doc["in_states"]):
        out_state = np.full(n, -1, np.int64)
        in_state = np.full(n, -1, np.int64)
        for r, s in enumerate(doc["out_states"]):
            out_state[s["members"]] = r
        for r, s in enumerate(doc["in_states"]):
            in_state[s["members"]] = r
    return TasbmModel(
        np.asarray(doc["theta"], float), joint, float(doc["T"]), int(doc.get("t0", 0)),
        out_state, in_state,
        tuple(s["id"] for s in doc["out_states"]), tuple(s["id"] for s in doc["in_states"]),
        tuple(doc["out_boundaries"]) if "out_boundaries" in doc else None,
        tuple(doc["in_boundaries"]) if "in_boundaries" in doc else None,
    )


def dump_models(models: Sequence[TasbmModel], out: IO, members: bool = False) -> None:
    doc = {"format": "tasbm-model/1", "windows": [model_to_dict(m, members) for m in models]}
    yaml.safe_dump(doc, out, sort_keys=False, default_flow_style=None, width=100)


def load_models(fh: IO) -> list[TasbmModel]:
    doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "windows" not in doc:
        raise ValueError("not a model document (missing 'windows')")
    return [model_from_dict(w) for w in doc["windows"]]
