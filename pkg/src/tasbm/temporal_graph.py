"""Timestamped directed edge streams: parsing, preprocessing and windowing."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

SECONDS_PER_DAY = 86400
# 1970-01-01 was a Thursday (Monday = 0).
_EPOCH_WEEKDAY = 3


class ParseError(ValueError):
    """Raised for malformed edge-list input; carries the 1-based line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TemporalEdge(NamedTuple):
    src: int
    dst: int
    t: int


def _as_int_array(values) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=np.int64).reshape(-1))


@dataclass(frozen=True, eq=False)
class TemporalGraph:
    """Time-sorted multiset of directed temporal edges over nodes ``0..n-1``.

    Edges are held column-wise in three int64 arrays. Construction sorts by
    timestamp with a stable sort, so edges sharing a timestamp keep their
    input order.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    t: np.ndarray
    id_map: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        src, dst, t = (_as_int_array(a) for a in (self.src, self.dst, self.t))
        if not (len(src) == len(dst) == len(t)):
            raise ValueError("src, dst and t must have equal length")
        if len(t) and (np.any(src < 0) or np.any(dst < 0)):
            raise ValueError("node ids must be non-negative")
        if len(t) and max(src.max(), dst.max()) >= self.n:
            raise ValueError("node id out of range for n")
        order = np.argsort(t, kind="stable")
        if len(t) > 1 and np.any(order != np.arange(len(t))):
            src, dst, t = src[order], dst[order], t[order]
        for arr in (src, dst, t):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "t", t)

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], n: Optional[int] = None) -> "TemporalGraph":
        rows = [tuple(e) for e in edges]
        arr = np.array(rows, dtype=np.int64).reshape(-1, 3)
        if n is None:
            n = int(arr[:, :2].max()) + 1 if len(arr) else 0
        return cls(n, arr[:, 0], arr[:, 1], arr[:, 2])

    @classmethod
    def empty(cls, n: int = 0) -> "TemporalGraph":
        z = np.zeros(0, dtype=np.int64)
        return cls(n, z, z, z)

    @property
    def m(self) -> int:
        return len(self.t)

    @property
    def time_span(self) -> tuple[int, int]:
        if not self.m:
            return (0, 0)
        return (int(self.t[0]), int(self.t[-1]))

    @property
    def edges(self) -> list[TemporalEdge]:
        return [TemporalEdge(int(u), int(v), int(ts)) for u, v, ts in zip(self.src, self.dst, self.t)]

    def __iter__(self) -> Iterator[TemporalEdge]:
        return iter(self.edges)

    def __len__(self) -> int:
        return self.m

    def subgraph(self, mask: np.ndarray) -> "TemporalGraph":
        return TemporalGraph(self.n, self.src[mask], self.dst[mask], self.t[mask], self.id_map)

    def relabel(self, perm: Sequence[int]) -> "TemporalGraph":
        """Apply the node permutation ``old -> perm[old]``."""
        p = np.asarray(perm, dtype=np.int64)
        return TemporalGraph(self.n, p[self.src], p[self.dst], self.t)

    def to_text(self) -> str:
        buf = io.StringIO()
        write_edge_list(self, buf)
        return buf.getvalue()

    def view(self, t0: int = None, T: int = None) -> "WindowView":
        if t0 is None:
            t0 = self.time_span[0]
        if T is None:
            T = self.time_span[1] - t0 + 1
        lo, hi = np.searchsorted(self.t, [t0, t0 + T], side="left")
        return WindowView(self, int(t0), int(T), int(lo), int(hi))


@dataclass(frozen=True)
class WindowView:
    """Half-open window ``[t0, t0 + T)`` over a contiguous edge range of ``graph``."""

    graph: TemporalGraph
    t0: int
    T: int
    lo: int
    hi: int

    @property
    def interval(self) -> tuple[int, int]:
        return (self.t0, self.t0 + self.T)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def m(self) -> int:
        return self.hi - self.lo

    @property
    def src(self) -> np.ndarray:
        return self.graph.src[self.lo:self.hi]

    @property
    def dst(self) -> np.ndarray:
        return self.graph.dst[self.lo:self.hi]

    @property
    def t(self) -> np.ndarray:
        return self.graph.t[self.lo:self.hi]

    @property
    def edges(self) -> list[TemporalEdge]:
        return [TemporalEdge(int(u), int(v), int(ts)) for u, v, ts in zip(self.src, self.dst, self.t)]

    def __len__(self) -> int:
        return self.m


GraphLike = Union[TemporalGraph, WindowView]


def parse_edge_list(stream: Union[IO, bytes, str], return_id_map: bool = False):
    """Read ``src dst t`` lines into a :class:`TemporalGraph`.

    Node ids are compacted to ``0..n-1`` in order of first appearance. With
    ``return_id_map`` the original->compact mapping is returned alongside.
    """
    if isinstance(stream, (bytes, bytearray)):
        text = stream.decode()
    elif isinstance(stream, str):
        text = stream
    else:
        text = stream.read()
        if isinstance(text, (bytes, bytearray)):
            text = text.decode()

    ids: dict[int, int] = {}
    src, dst, ts = [], [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 fields, got {len(parts)}")
        try:
            u, v, t = (int(p) for p in parts)
        except ValueError:
            raise ParseError(lineno, f"non-integer field in {line!r}") from None
        if u < 0 or v < 0:
            raise ParseError(lineno, "negative node id")
        if t < 0:
            raise ParseError(lineno, "negative timestamp")
        src.append(ids.setdefault(u, len(ids)))
        dst.append(ids.setdefault(v, len(ids)))
        ts.append(t)
    g = TemporalGraph(len(ids), np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                      np.array(ts, dtype=np.int64), id_map=dict(ids))
    return (g, dict(ids)) if return_id_map else g


def read_edge_list(path, return_id_map: bool = False):
    with open(path, "rb") as fh:
        return parse_edge_list(fh, return_id_map=return_id_map)


def write_edge_list(graph: GraphLike, out: IO) -> None:
    for u, v, t in zip(graph.src.tolist(), graph.dst.tolist(), graph.t.tolist()):
        out.write(f"{u} {v} {t}\n")


def degrees(graph: GraphLike) -> np.ndarray:
    """Total (in + out) temporal-edge incidences per node."""
    return (np.bincount(graph.src, minlength=graph.n) + np.bincount(graph.dst, minlength=graph.n)).astype(np.int64)


def _largest_weak_component(n: int, src: np.ndarray, dst: np.ndarray, alive: np.ndarray) -> np.ndarray:
    adj = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, labels = connected_components(adj, directed=True, connection="weak")
    sizes = np.bincount(labels[alive], minlength=n)
    if not sizes.any():
        return np.zeros(n, dtype=bool)
    # ties go to the component holding the smallest node id
    return alive & (labels == int(np.argmax(sizes)))


def preprocess(graph: TemporalGraph, degree_fraction: float = 0.0,
               keep_largest_component: bool = False) -> TemporalGraph:
    """Drop self-loops, low-degree nodes and (optionally) all but the largest
    weakly connected component. Node ids are left unchanged."""
    if not 0.0 <= degree_fraction <= 1.0:
        raise ValueError("degree_fraction must lie in [0, 1]")
    g = graph.subgraph(graph.src != graph.dst)
    deg = degrees(g)
    if degree_fraction > 0 and len(deg) and deg.max() > 0:
        alive = deg >= degree_fraction * deg.max()
    else:
        alive = np.ones(graph.n, dtype=bool)
    g = g.subgraph(alive[g.src] & alive[g.dst])
    if keep_largest_component:
        touched = np.zeros(graph.n, dtype=bool)
        touched[g.src] = True
        touched[g.dst] = True
        keep = _largest_weak_component(graph.n, g.src, g.dst, touched)
        g = g.subgraph(keep[g.src] & keep[g.dst])
    return g


def _weekday_mask(skip_weekdays: Iterable[int]) -> np.ndarray:
    skip = np.zeros(7, dtype=bool)
    for d in skip_weekdays:
        if not 0 <= int(d) < 7:
            raise ValueError("weekday must be in 0..6 (Monday = 0)")
        skip[int(d)] = True
    return skip


def _shift_unmasked(t: np.ndarray, skip: np.ndarray, day_length: int) -> np.ndarray:
    # masked days strictly before each timestamp's day, in closed form
    week, rem = np.divmod(t // day_length, 7)
    partial = np.zeros(8, dtype=np.int64)
    for r in range(7):
        partial[r + 1] = partial[r] + skip[(r + _EPOCH_WEEKDAY) % 7]
    return t - (week * int(skip.sum()) + partial[rem]) * day_length


def excise_days(graph: TemporalGraph, skip_weekdays: Iterable[int],
                day_length: int = SECONDS_PER_DAY) -> TemporalGraph:
    """Remove masked weekdays from the time axis.

    Timestamps are read as seconds since the Unix epoch. Edges on masked days
    are dropped, and every remaining timestamp is shifted back by the masked
    time preceding it, so durations count unmasked time only.
    """
    skip = _weekday_mask(skip_weekdays)
    if not skip.any():
        return graph
    if skip.all():
        return TemporalGraph.empty(graph.n)
    weekday = (graph.t // day_length + _EPOCH_WEEKDAY) % 7
    g = graph.subgraph(~skip[weekday])
    return TemporalGraph(g.n, g.src, g.dst, _shift_unmasked(g.t, skip, day_length), g.id_map)


def window_slices(graph: TemporalGraph, T: int, origin: Optional[int] = None,
                  skip_weekdays: Optional[Iterable[int]] = None, end: Optional[int] = None,
                  day_length: int = SECONDS_PER_DAY) -> list[WindowView]:
    """Consecutive half-open windows ``[origin + iT, origin + (i+1)T)``.

    Windows cover the edge span, or ``[origin, end)`` when ``end`` is given.
    With ``skip_weekdays`` the masked days are excised first (see
    :func:`excise_days`); ``origin`` and ``end`` are then mapped onto the
    shortened time axis as well.
    """
    if T <= 0:
        raise ValueError("window length T must be positive")
    if skip_weekdays:
        skip = _weekday_mask(skip_weekdays)
        graph = excise_days(graph, skip_weekdays, day_length)
        remap = lambda x: int(_shift_unmasked(np.array([x], dtype=np.int64), skip, day_length)[0])
        origin = None if origin is None else remap(origin)
        end = None if end is None else remap(end)
    if origin is None:
        if graph.m == 0:
            return []
        origin = graph.time_span[0]
    if graph.m and origin > graph.time_span[0]:
        raise ValueError("origin lies after the first edge; windows would drop edges")
    if end is None:
        if graph.m == 0:
            return []
        end = graph.time_span[1] + 1
    elif graph.m and end <= graph.time_span[1]:
        raise ValueError("end lies before the last edge; windows would drop edges")
    count = max(1, -(-(end - origin) // T))
    starts = origin + T * np.arange(count + 1, dtype=np.int64)
    cuts = np.searchsorted(graph.t, starts, side="left")
    return [WindowView(graph, int(starts[i]), int(T), int(cuts[i]), int(cuts[i + 1])) for i in range(count)]
