"""Observed-versus-expected comparisons: ensemble error, log-ratio series and robust flags."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np


class UndefinedResult(ValueError):
    pass


@dataclass(frozen=True)
class MotifSeries:
    """Per-window (observed, expected) pairs for one motif."""

    motif: str
    windows: tuple
    observed: tuple
    expected: tuple

    def __post_init__(self):
        if not len(self.windows) == len(self.observed) == len(self.expected):
            raise ValueError("windows, observed and expected must have equal length")
        starts = [w[0] if isinstance(w, tuple) else w for w in self.windows]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("windows must be strictly increasing")
        if any(x < 0 for x in self.observed) or any(x < 0 for x in self.expected):
            raise ValueError("observed and expected values must be non-negative")
        for name in ("windows", "observed", "expected"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def __len__(self) -> int:
        return len(self.windows)


def msre(observed: Sequence[float], expected) -> tuple[float, int]:
    """Mean squared relative error ``mean(((N_i - N) / N_i)^2)`` over the ensemble.

    ``expected`` is one value for the whole ensemble or one per observation
    (when each member has its own fitted model). Observations equal to zero
    are left out; returns ``(value, excluded)``.
    """
    obs = np.asarray(observed, dtype=float)
    exp = np.broadcast_to(np.asarray(expected, dtype=float), obs.shape)
    keep = obs > 0
    if not keep.any():
        raise UndefinedResult("every observed count is zero")
    rel = (obs[keep] - exp[keep]) / obs[keep]
    return float(np.mean(rel * rel)), int((~keep).sum())


def log_ratio(observed: float, expected: float) -> float:
    """``ln(observed / expected)``; -inf when nothing was observed, nan when
    nothing was expected."""
    if expected <= 0:
        return math.nan
    if observed == 0:
        return -math.inf
    return math.log(observed / expected)


def log_ratio_series(series: MotifSeries) -> np.ndarray:
    return np.array([log_ratio(o, e) for o, e in zip(series.observed, series.expected)])


@dataclass(frozen=True)
class Flag:
    window: object
    motif: str
    score: float


def robust_scores(values: Sequence[float]) -> np.ndarray:
    """Deviation from the median in MAD units, over finite values only.

    Non-finite inputs score nan. With zero MAD, values equal to the median
    score 0 and any other value scores +-inf.
    """
    x = np.asarray(values, dtype=float)
    ok = np.isfinite(x)
    out = np.full(len(x), np.nan)
    if not ok.any():
        return out
    med = np.median(x[ok])
    mad = np.median(np.abs(x[ok] - med))
    dev = x[ok] - med
    if mad > 0:
        out[ok] = dev / mad
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            out[ok] = np.where(dev == 0, 0.0, np.sign(dev) * np.inf)
    return out


def flag_anomalies(series: MotifSeries, threshold: float = 3.0, values=None) -> list[Flag]:
    """Windows whose log-ratio lies more than ``threshold`` MADs from the
    series median, strongest first. ``values`` overrides the log-ratios
    (e.g. to score raw counts)."""
    if len(series) < 5:
        raise ValueError("need at least 5 windows for robust statistics")
    vals = log_ratio_series(series) if values is None else np.asarray(values, dtype=float)
    scores = robust_scores(vals)
    flags = [Flag(w, series.motif, float(s)) for w, s in zip(series.windows, scores)
             if not np.isnan(s)]
    flags = [f for f in flags if abs(f.score) > threshold]
    flags.sort(key=lambda f: -abs(f.score))
    return flags


def build_series(counts: Iterable, expectations: Iterable) -> dict[str, MotifSeries]:
    """Join count and expectation rows on (window, motif)."""
    exp = {(r.window, r.motif): r.expected for r in expectations}
    by_motif: dict = {}
    for c in counts:
        key = (tuple(c.interval), c.motif)
        if key not in exp:
            raise ValueError(f"no expectation for motif {c.motif} in window {c.interval}")
        by_motif.setdefault(c.motif, []).append((tuple(c.interval), c.count, exp[key]))
    out = {}
    for motif, rows in by_motif.items():
        rows.sort()
        out[motif] = MotifSeries(motif, tuple(r[0] for r in rows), tuple(r[1] for r in rows),
                                 tuple(r[2] for r in rows))
    return out


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


def detect(series_by_motif: dict, threshold: float = 3.0) -> list[tuple]:
    """Rows (window, motif, observed, expected, log_ratio, flag) sorted by window then motif."""
    rows = []
    for motif, s in series_by_motif.items():
        flagged = {f.window for f in flag_anomalies(s, threshold)} if len(s) >= 5 else set()
        for w, o, e, lr in zip(s.windows, s.observed, s.expected, log_ratio_series(s)):
            rows.append((w, motif, o, e, lr, w in flagged))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def write_detect_csv(rows: Iterable[tuple], out: IO) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["window", "motif", "observed", "expected", "log_ratio", "flag"])
    for win, motif, o, e, lr, flag in rows:
        w.writerow([win[0] if isinstance(win, tuple) else win, motif, o, _fmt(e), _fmt(lr), int(flag)])


def read_detect_csv(fh: IO) -> list[tuple]:
    return [(int(r["window"]), r["motif"], int(r["observed"]), float(r["expected"]), float(r["log_ratio"]),
             r["flag"] == "1") for r in csv.DictReader(fh)]
