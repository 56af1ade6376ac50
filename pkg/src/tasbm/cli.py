"""Command-line front end: generate, preprocess, fit, count, expect, variance, detect, report, pipeline.

Exit status is 0 on success, 1 for usage errors, 2 for data errors and 3 for
unsupported configurations. Failures print one line
``tasbm: error kind=<usage|data|unsupported>: <reason>`` on stderr and
leave no output files behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import yaml

from . import analytics, anomaly, counting, fitting, generator
from .motifs import MotifError, catalog_36, parse_motif
from .temporal_graph import ParseError, TemporalGraph, parse_edge_list, preprocess, window_slices, write_edge_list

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_UNSUPPORTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class _Outputs:
    """Output files staged in memory and written together at the end."""

    def __init__(self):
        self.files: list[tuple[str, str]] = []

    def add(self, path: str, text: str) -> None:
        self.files.append((path, text))

    def commit(self) -> None:
        staged = []
        try:
            for path, text in self.files:
                d = os.path.dirname(os.path.abspath(path))
                if not os.path.isdir(d):
                    raise DataError(f"output directory does not exist: {d}")
                fd, tmp = tempfile.mkstemp(dir=d, prefix=".tasbm-")
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                staged.append((tmp, path))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)


def _threads(args) -> int:
    value = args.threads if getattr(args, "threads", None) else os.environ.get("TASBM_THREADS", "1")
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"thread count must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError("thread count must be at least 1")
    return n


def _map(args, fn, items):
    items = list(items)
    n = _threads(args)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(n) as pool:
        return list(pool.map(fn, items))


def _read_text(path: str) -> str:
    try:
        with open(path, newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _read_graph(path: str, return_id_map: bool = False):
    try:
        return parse_edge_list(_read_text(path), return_id_map=return_id_map)
    except ParseError as exc:
        raise DataError(f"{path}: {exc}") from None


def _read_yaml(path: str):
    try:
        return yaml.safe_load(_read_text(path))
    except yaml.YAMLError as exc:
        raise DataError(f"{path}: invalid YAML ({str(exc).splitlines()[0]})") from None


def _buckets(spec, graph, T):
    if spec in (None, "auto"):
        return fitting.BucketConfig.auto(graph, T)
    spec = str(spec)
    if spec.startswith("natural:"):
        try:
            return fitting.BucketConfig.natural_breaks(int(spec.split(":", 1)[1]))
        except ValueError:
            raise UsageError(f"bad bucket spec {spec!r}") from None
    try:
        return fitting.BucketConfig(tuple(float(x) for x in spec.split(",")))
    except ValueError as exc:
        raise UsageError(f"bad bucket boundaries {spec!r}: {exc}") from None


def _motifs(args):
    if getattr(args, "motif", None):
        try:
            return [parse_motif(m) for m in args.motif]
        except MotifError as exc:
            raise UsageError(str(exc)) from None
    return [m for _, m in catalog_36()]


def _skip_days(args):
    if not getattr(args, "skip_weekdays", None):
        return None
    try:
        return [int(x) for x in str(args.skip_weekdays).split(",")]
    except ValueError:
        raise UsageError("skip-weekdays takes comma-separated weekday numbers (0=Monday)") from None


def _windows(args, graph):
    if args.T is None:
        return [graph.view(args.origin)] if graph.m or args.origin is not None else []
    try:
        return window_slices(graph, args.T, origin=args.origin, skip_weekdays=_skip_days(args), end=args.end)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _csv_text(writer, rows) -> str:
    buf = io.StringIO()
    writer(rows, buf)
    return buf.getvalue()


def _require(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def _positive(args, *names):
    for name in names:
        v = getattr(args, name, None)
        if v is not None and not v > 0:
            raise UsageError(f"--{name.replace('_', '-')} must be positive")


# --- subcommands -------------------------------------------------------------

def cmd_generate(args, out: _Outputs):
    _require(args, "spec", "out")
    try:
        spec = generator.spec_from_dict(_read_yaml(args.spec) or {})
    except (ValueError, TypeError) as exc:
        raise DataError(f"{args.spec}: {exc}") from None
    if args.seed is not None:
        spec = generator.GeneratorSpec(spec.out_sizes, spec.in_sizes, spec.thetas, spec.boundaries, args.seed,
                                       spec.anomalies)
    try:
        graph, audit = generator.generate(spec)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    out.add(args.out, _csv_text(write_edge_list, graph))
    if args.audit:
        out.add(args.audit, _csv_text(write_edge_list, audit))


def cmd_preprocess(args, out: _Outputs):
    _require(args, "input", "out")
    graph, id_map = _read_graph(args.input, return_id_map=True)
    if not 0 <= args.degree_fraction < 1:
        raise UsageError("--degree-fraction must lie in [0, 1)")
    clean = preprocess(graph, args.degree_fraction, args.keep_largest_component)
    out.add(args.out, _csv_text(write_edge_list, clean))
    if args.id_map:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["original_id", "node"])
        for orig, node in sorted(id_map.items(), key=lambda kv: kv[1]):
            w.writerow([orig, node])
        out.add(args.id_map, buf.getvalue())


def _fit_models(args, graph):
    if args.T is None:
        args.T = graph.time_span[1] - graph.time_span[0] + 1 if graph.m else 1
    windows = _windows(args, graph)
    buckets = _buckets(args.buckets, graph, args.T)
    return _map(args, lambda w: fitting.fit_window(w, buckets, exact=not args.approx), windows)


def cmd_fit(args, out: _Outputs):
    _require(args, "input", "out")
    _positive(args, "T")
    graph = _read_graph(args.input)
    models = _fit_models(args, graph)
    buf = io.StringIO()
    fitting.dump_models(models, buf, members=args.members)
    out.add(args.out, buf.getvalue())


def _count_rows(args, graph, motifs):
    windows = _windows(args, graph)
    try:
        per = _map(args, lambda w: counting.count_all(w, motifs, args.delta, method=args.method), windows)
    except OverflowError as exc:
        raise DataError(str(exc)) from None
    return [r for rows in per for r in rows]


def _sorted_results(rows, window_of):
    return sorted(rows, key=lambda r: (window_of(r), r.motif))


def cmd_count(args, out: _Outputs):
    _require(args, "input", "delta", "out")
    _positive(args, "T", "delta")
    graph = _read_graph(args.input)
    rows = _sorted_results(_count_rows(args, graph, _motifs(args)), lambda r: r.interval)
    out.add(args.out, _csv_text(counting.write_counts_csv, rows))


def _load_models(path):
    try:
        return fitting.load_models(io.StringIO(_read_text(path)))
    except (ValueError, KeyError, TypeError, yaml.YAMLError) as exc:
        raise DataError(f"{path}: not a valid model file ({exc})") from None


def _expect_rows(args, models, motifs, with_variance):
    def one(model):
        cfg = analytics.AnalysisConfig(args.delta, model.T, model.t0)
        if with_variance == "required":
            analytics._require_variance_regime(cfg)
        return analytics.expected_all(model, motifs, cfg, with_variance=bool(with_variance))
    per = _map(args, one, models)
    return [r for rows in per for r in rows]


def cmd_expect(args, out: _Outputs):
    _require(args, "model", "delta", "out")
    _positive(args, "delta")
    models = _load_models(args.model)
    rows = _sorted_results(_expect_rows(args, models, _motifs(args), args.variance), lambda r: r.window)
    out.add(args.out, _csv_text(analytics.write_expectations_csv, rows))


def cmd_variance(args, out: _Outputs):
    _require(args, "model", "delta", "out")
    _positive(args, "delta")
    models = _load_models(args.model)
    rows = _sorted_results(_expect_rows(args, models, _motifs(args), "required"), lambda r: r.window)
    out.add(args.out, _csv_text(analytics.write_expectations_csv, rows))


def _read_counts(path):
    try:
        return counting.read_counts_csv(io.StringIO(_read_text(path)))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: not a counts file ({exc})") from None


def _read_expectations(path):
    try:
        return analytics.read_expectations_csv(io.StringIO(_read_text(path)))
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: not an expectations file ({exc})") from None


def _detect_rows(counts, expectations, threshold):
    try:
        series = anomaly.build_series(counts, expectations)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    return anomaly.detect(series, threshold)


def cmd_detect(args, out: _Outputs):
    _require(args, "counts", "expectations", "out")
    rows = _detect_rows(_read_counts(args.counts), _read_expectations(args.expectations), args.threshold)
    out.add(args.out, _csv_text(anomaly.write_detect_csv, rows))


def _fmt(x):
    return anomaly._fmt(float(x))


def report_rows(counts, expectations, threshold):
    """Long-format rows (window_start, window_end, motif, metric, value)."""
    exp = {(r.window, r.motif): r for r in expectations}
    detected = {(w, m): (lr, flag) for w, m, _, _, lr, flag in _detect_rows(counts, expectations, threshold)}
    rows = []
    for c in counts:
        key = (tuple(c.interval), c.motif)
        e = exp[key]
        lr, flag = detected[key]
        metrics = [("observed", str(c.count)), ("expected", _fmt(e.expected))]
        if e.variance is not None:
            metrics.append(("variance", _fmt(e.variance)))
        metrics += [("log_ratio", _fmt(lr)), ("flag", str(int(flag)))]
        rows += [(key[0][0], key[0][1], c.motif, name, value) for name, value in metrics]
    rows.sort(key=lambda r: (r[0], r[2]))
    return rows


def _write_report(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["window_start", "window_end", "motif", "metric", "value"])
    w.writerows(rows)


def cmd_report(args, out: _Outputs):
    _require(args, "counts", "expectations", "out")
    rows = report_rows(_read_counts(args.counts), _read_expectations(args.expectations), args.threshold)
    out.add(args.out, _csv_text(_write_report, rows))


def cmd_pipeline(args, out: _Outputs):
    _require(args, "input", "delta", "out")
    _positive(args, "T", "delta")
    graph = _read_graph(args.input)
    models = _fit_models(args, graph)
    motifs = _motifs(args)
    counts = _sorted_results(_count_rows(args, graph, motifs), lambda r: r.interval)
    expectations = _sorted_results(_expect_rows(args, models, motifs, args.variance), lambda r: r.window)
    rows = report_rows(counts, expectations, args.threshold)
    out.add(args.out, _csv_text(_write_report, rows))
    if args.save_dir:
        buf = io.StringIO()
        fitting.dump_models(models, buf)
        out.add(os.path.join(args.save_dir, "model.yaml"), buf.getvalue())
        out.add(os.path.join(args.save_dir, "counts.csv"), _csv_text(counting.write_counts_csv, counts))
        out.add(os.path.join(args.save_dir, "expectations.csv"),
                _csv_text(analytics.write_expectations_csv, expectations))
        out.add(os.path.join(args.save_dir, "detect.csv"),
                _csv_text(anomaly.write_detect_csv, _detect_rows(counts, expectations, args.threshold)))


# --- argument parsing --------------------------------------------------------

def _window_args(p):
    p.add_argument("--T", type=int, help="window length in time units (default: one window over the data)")
    p.add_argument("--origin", type=int, help="start of the first window (default: first timestamp)")
    p.add_argument("--end", type=int, help="end of the last window (default: after the last timestamp)")
    p.add_argument("--skip-weekdays", help="comma-separated weekdays to excise first, 0=Monday")


def _motif_args(p):
    p.add_argument("--motif", action="append",
                   help="catalog label (C3) or literal ('k=3; 0>1, 1>2, 2>0'); repeatable; default: all 36")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tasbm", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="YAML file supplying option values; command-line flags win")
    parser.add_argument("--threads", type=int, help="worker threads (default: $TASBM_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a synthetic network from a spec file")
    p.add_argument("--spec", help="generator spec (YAML)")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--out", help="edge list output")
    p.add_argument("--audit", help="injected-edge sidecar output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="drop self-loops, low-degree nodes, small components")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--degree-fraction", type=float, default=0.0,
                   help="drop nodes below this fraction of the maximum degree")
    p.add_argument("--keep-largest-component", action="store_true")
    p.add_argument("--id-map", help="write original-id to node-index table here")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="fit a block model to every window")
    p.add_argument("--input")
    p.add_argument("--out", help="model file (YAML)")
    _window_args(p)
    p.add_argument("--buckets", default="auto", help="'auto', 'natural:N', or comma-separated rate boundaries")
    p.add_argument("--approx", action="store_true", help="one-pass rate estimate instead of the exact fit")
    p.add_argument("--members", action="store_true", help="store per-node state memberships")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("count", help="exact motif counts per window")
    p.add_argument("--input")
    p.add_argument("--out")
    p.add_argument("--delta", type=int)
    _window_args(p)
    _motif_args(p)
    p.add_argument("--method", choices=["auto", "fast", "enumerate"], default="auto")
    p.set_defaults(func=cmd_count)

    for name, func, helptext in (("expect", cmd_expect, "expected motif counts from a model file"),
                                 ("variance", cmd_variance, "expected counts with variances (needs T == delta)")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model")
        p.add_argument("--out")
        p.add_argument("--delta", type=float)
        _motif_args(p)
        if name == "expect":
            p.add_argument("--variance", action="store_true", help="attach variances where supported")
        p.set_defaults(func=func)

    for name, func, helptext in (("detect", cmd_detect, "log-ratio scores and MAD flags"),
                                 ("report", cmd_report, "long-format table of all metrics")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--counts")
        p.add_argument("--expectations")
        p.add_argument("--out")
        p.add_argument("--threshold", type=float, default=3.0, help="flag threshold in MAD units")
        p.set_defaults(func=func)

    p = sub.add_parser("pipeline", help="fit, count, expect and detect in one go")
    p.add_argument("--input")
    p.add_argument("--out", help="long-format report")
    p.add_argument("--save-dir", help="also write model, counts, expectations and detect files here")
    p.add_argument("--delta", type=int)
    _window_args(p)
    _motif_args(p)
    p.add_argument("--buckets", default="auto")
    p.add_argument("--approx", action="store_true")
    p.add_argument("--method", choices=["auto", "fast", "enumerate"], default="auto")
    p.add_argument("--variance", action="store_true")
    p.add_argument("--threshold", type=float, default=3.0)
    p.set_defaults(func=cmd_pipeline)
    return parser


def _apply_config(parser, argv):
    pre = _Parser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = _read_yaml(known.config)
    if cfg is None:
        return
    if not isinstance(cfg, dict):
        raise DataError(f"{known.config}: config must be a mapping of option names to values")
    cfg = {str(k).replace("-", "_"): v for k, v in cfg.items()}
    subparsers = parser._subparsers._group_actions[0].choices
    for sp in subparsers.values():
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
    known_dests = {a.dest for sp in subparsers.values() for a in sp._actions} | {"threads", "config"}
    unknown = sorted(set(cfg) - known_dests)
    if unknown:
        raise UsageError(f"unknown option(s) in config file: {', '.join(unknown)}")
    if "threads" in cfg:
        parser.set_defaults(threads=cfg["threads"])


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        out = _Outputs()
        args.func(args, out)
        out.commit()
        return EXIT_OK
    except UsageError as exc:
        kind, code, msg = "usage", EXIT_USAGE, str(exc)
    except analytics.UnsupportedConfiguration as exc:
        kind, code, msg = "unsupported", EXIT_UNSUPPORTED, str(exc)
    except (DataError, ValueError, OverflowError) as exc:
        kind, code, msg = "data", EXIT_DATA, str(exc)
    print(f"tasbm: error kind={kind}: {' '.join(msg.split())}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
