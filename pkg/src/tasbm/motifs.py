"""Temporal motifs, the 36-motif catalog of 3-edge patterns, and the δ-instance test."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple, Sequence

TRIANGLE = "triangle"
TWO_NODE = "two_node"
RECIPROCATED = "reciprocated"
DOUBLE_EDGE = "double_edge"
CATEGORIES = (TRIANGLE, TWO_NODE, RECIPROCATED, DOUBLE_EDGE)


class MotifError(ValueError):
    pass


@dataclass(frozen=True)
class TemporalMotif:
    """A k-node pattern whose edge list order is the required temporal order.

    ``edges[i]`` is the ``(src_slot, dst_slot)`` pair of the i-th edge in time.
    """

    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        if not edges:
            raise MotifError("a motif needs at least one edge")
        for a, b in edges:
            if a == b:
                raise MotifError(f"self-loop edge {a}>{b}")
            if a < 0 or b < 0:
                raise MotifError("slots must be non-negative")
        slots = {s for e in edges for s in e}
        if slots != set(range(len(slots))):
            raise MotifError("slots must be exactly 0..k-1 with no isolated slot")
        object.__setattr__(self, "edges", edges)

    @property
    def k(self) -> int:
        return 1 + max(s for e in self.edges for s in e)

    @property
    def z(self) -> int:
        return len(self.edges)

    def canonical(self) -> tuple[tuple[int, int], ...]:
        """Slot relabeling by first appearance; equal iff the motifs are equivalent."""
        return canonical_form(self.edges)

    def literal(self) -> str:
        return f"k={self.k}; " + ", ".join(f"{a}>{b}" for a, b in self.edges)

    def __str__(self) -> str:
        return self.literal()


class MotifLabel(NamedTuple):
    row: str
    col: int

    def __str__(self) -> str:
        return f"{self.row}{self.col}"

    @classmethod
    def parse(cls, text: str) -> "MotifLabel":
        m = re.fullmatch(r"\s*([A-Fa-f])([1-6])\s*", text)
        if not m:
            raise MotifError(f"not a catalog label: {text!r}")
        return cls(m.group(1).upper(), int(m.group(2)))


def canonical_form(edges: Iterable[Sequence[int]]) -> tuple[tuple[int, int], ...]:
    relabel: dict = {}
    out = []
    for a, b in edges:
        a = relabel.setdefault(a, len(relabel))
        b = relabel.setdefault(b, len(relabel))
        out.append((a, b))
    return tuple(out)


def category(motif: TemporalMotif) -> str:
    if motif.z != 3 or motif.k > 3:
        raise MotifError(f"categories are defined for 3-edge motifs on at most 3 nodes, got {motif}")
    if motif.k == 2:
        return TWO_NODE
    pairs = [frozenset(e) for e in motif.edges]
    if len(set(pairs)) == 3:
        return TRIANGLE
    ordered = set(motif.edges)
    if any((b, a) in ordered for a, b in ordered):
        return RECIPROCATED
    if len(ordered) < 3:
        return DOUBLE_EDGE
    raise MotifError(f"unsupported motif shape {motif}")


# Label rows/columns reserved for each category, in catalog order.
_CATEGORY_SLOTS = {
    TRIANGLE: [("A", c) for c in (1, 2, 3, 4)] + [("B", c) for c in (1, 2, 3, 4)],
    TWO_NODE: [("A", 5), ("A", 6), ("B", 5), ("B", 6)],
    RECIPROCATED: [("C", c) for c in range(1, 7)] + [("D", c) for c in range(1, 7)],
    DOUBLE_EDGE: [("E", c) for c in range(1, 7)] + [("F", c) for c in range(1, 7)],
}


@lru_cache(maxsize=None)
def catalog_36() -> tuple[tuple[MotifLabel, TemporalMotif], ...]:
    """All 2- and 3-node motifs with 3 edges, labeled A1..F6.

    Within a category, motifs are ordered by their canonical edge list and
    fill that category's label slots row-major.
    """
    forms = set()
    for edges in itertools.product(itertools.permutations(range(3), 2), repeat=3):
        forms.add(canonical_form(edges))
    by_cat: dict[str, list] = {c: [] for c in CATEGORIES}
    for form in sorted(forms):
        motif = TemporalMotif(form)
        by_cat[category(motif)].append(motif)
    out = []
    for cat in CATEGORIES:
        slots = _CATEGORY_SLOTS[cat]
        assert len(slots) == len(by_cat[cat])
        for (row, col), motif in zip(slots, by_cat[cat]):
            out.append((MotifLabel(row, col), motif))
    out.sort(key=lambda lm: (lm[0].row, lm[0].col))
    return tuple(out)


@lru_cache(maxsize=None)
def _catalog_index() -> dict:
    return {m.canonical(): (lab, m) for lab, m in catalog_36()}


def catalog_lookup(key) -> tuple[MotifLabel, TemporalMotif]:
    """Find a catalog entry by label (``"C3"``) or by an equivalent motif."""
    if isinstance(key, str):
        label = MotifLabel.parse(key)
        for lab, m in catalog_36():
            if lab == label:
                return lab, m
    elif isinstance(key, TemporalMotif):
        hit = _catalog_index().get(key.canonical())
        if hit:
            return hit
    raise MotifError(f"no catalog motif for {key!r}")


def motif_name(motif: TemporalMotif) -> str:
    """Catalog label when the motif is in the catalog, else its literal."""
    hit = _catalog_index().get(motif.canonical())
    return str(hit[0]) if hit else motif.literal()


_EDGE_RE = re.compile(r"^\s*(\d+)\s*>\s*(\d+)\s*$")


def parse_motif(text: str) -> TemporalMotif:
    """Parse ``"k=3; 0>1, 1>2, 2>0"`` (the ``k=`` prefix is optional) or a catalog label."""
    text = text.strip()
    if re.fullmatch(r"[A-Fa-f][1-6]", text):
        return catalog_lookup(text)[1]
    k = None
    if ";" in text:
        head, text = text.split(";", 1)
        m = re.fullmatch(r"\s*k\s*=\s*(\d+)\s*", head)
        if not m:
            raise MotifError(f"bad motif header {head!r}")
        k = int(m.group(1))
    edges = []
    for part in text.split(","):
        m = _EDGE_RE.match(part)
        if not m:
            raise MotifError(f"bad motif edge {part!r}")
        edges.append((int(m.group(1)), int(m.group(2))))
    motif = TemporalMotif(tuple(edges))
    if k is not None and k != motif.k:
        raise MotifError(f"header says k={k} but edges use {motif.k} slots")
    return motif


def is_delta_instance(edges: Sequence[Sequence[int]], motif: TemporalMotif, delta) -> bool:
    """Check one candidate edge sequence ``[(u, v, t), ...]`` against ``motif``.

    Sequence position i is matched to motif edge i.
    """
    if len(edges) != motif.z:
        raise ValueError(f"expected {motif.z} edges, got {len(edges)}")
    slot_of: dict = {}
    node_of: dict = {}
    for (u, v, _), (a, b) in zip(edges, motif.edges):
        for node, slot in ((u, a), (v, b)):
            if slot_of.setdefault(node, slot) != slot or node_of.setdefault(slot, node) != node:
                return False
    times = [e[2] for e in edges]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        return False
    return times[-1] - times[0] <= delta
