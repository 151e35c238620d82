"""Command-line front door: simulate, metrics, serve, convert.

Defaults mirror the library defaults (naive Bayes, TF-IDF, certainty-based
querying, dynamic resampling), so `screenloop simulate data.csv` runs the
headline configuration with zero flags.  Every subcommand is deterministic
given its flags, input files and seed; results documents embed the fully
resolved settings for audit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus, simulate
from .engine import Settings, settings_to_dict
from .classify import ClassifierSpec
from .errors import EmptyDataset, ScreenloopError
from .strategy import BalanceSpec, QuerySpec
from .textfeat import FeatureSpec

CLASSIFIER_BY_FLAG = {"nb": "naive_bayes", "logreg": "logistic_regression", "svm": "linear_svm"}
BALANCE_BY_FLAG = {"simple": "simple", "undersample": "undersample", "dr": "dynamic_resample"}

DEFAULT_PORT = 5275


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenloop",
        description="Active-learning screening: simulate benchmarks, inspect "
        "metrics, serve the local screening UI, convert formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="benchmark on a fully labeled dataset")
    sim.add_argument("dataset", help="labeled RIS or CSV file")
    sim.add_argument("--classifier", choices=sorted(CLASSIFIER_BY_FLAG), default="nb")
    sim.add_argument("--features", choices=["tfidf"], default="tfidf")
    sim.add_argument("--query", choices=["max", "uncertainty", "random", "mixed"], default="max")
    sim.add_argument("--mixed-random-fraction", type=float, default=0.05, metavar="F")
    sim.add_argument("--balance", choices=sorted(BALANCE_BY_FLAG), default="dr")
    sim.add_argument("--runs", type=int, default=15, metavar="N")
    sim.add_argument("--seed", type=int, default=0, metavar="S")
    sim.add_argument("--prior-included", type=int, default=1, metavar="N")
    sim.add_argument("--prior-excluded", type=int, default=1, metavar="N")
    sim.add_argument("--exclude-priors-from-metrics", action="store_true")
    sim.add_argument("--ngram-max", type=int, default=1, metavar="N")
    sim.add_argument("--split-ta", action="store_true",
                     help="separate title/abstract feature blocks")
    sim.add_argument("--title-weight", type=float, default=1.0, metavar="W")
    sim.add_argument("--abstract-weight", type=float, default=1.0, metavar="W")
    sim.add_argument("--jobs", type=int, default=1, metavar="N")
    sim.add_argument("-o", "--output-dir", default=".", metavar="DIR")
    sim.set_defaults(func=cmd_simulate)

    met = sub.add_parser("metrics", help="recompute and print metrics from a results file")
    met.add_argument("results", help="results.json written by `simulate`")
    met.add_argument("--wss", type=float, action="append", default=[], metavar="L",
                     help="extra WSS level in percent (repeatable)")
    met.add_argument("--rrf", type=float, action="append", default=[], metavar="F",
                     help="extra RRF fraction in percent (repeatable)")
    met.set_defaults(func=cmd_metrics)

    srv = sub.add_parser("serve", help="run the local screening service and UI")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=DEFAULT_PORT)
    srv.add_argument("--data-dir", default=None,
                     help="project-state directory (default $SCREENLOOP_DATA_DIR "
                     "or ./screenloop_data)")
    srv.add_argument("--ui-dir", default=None,
                     help="static UI bundle (default $SCREENLOOP_UI_DIR or "
                     "./frontend/dist when present)")
    srv.set_defaults(func=cmd_serve)

    conv = sub.add_parser("convert", help="convert between RIS and CSV")
    conv.add_argument("input")
    conv.add_argument("output")
    conv.set_defaults(func=cmd_convert)
    return parser


def _settings_from_args(args) -> Settings:
    return Settings(
        feature=FeatureSpec(
            ngram_max=args.ngram_max,
            split_title_abstract=args.split_ta,
            title_weight=args.title_weight,
            abstract_weight=args.abstract_weight,
        ),
        classifier=ClassifierSpec(kind=CLASSIFIER_BY_FLAG[args.classifier]),
        query=QuerySpec(kind=args.query, mixed_random_fraction=args.mixed_random_fraction),
        balance=BalanceSpec(kind=BALANCE_BY_FLAG[args.balance]),
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    path = Path(args.dataset)
    if not path.exists():
        print(f"error: dataset not found: {path}", file=sys.stderr)
        return 1
    dataset = corpus.parse_auto(path.read_bytes(), path.name)
    settings = _settings_from_args(args)
    settings.validate()
    spec = simulate.SimulationSpec(
        settings=settings,
        n_runs=args.runs,
        n_prior_included=args.prior_included,
        n_prior_excluded=args.prior_excluded,
        master_seed=args.seed,
        exclude_priors_from_metrics=args.exclude_priors_from_metrics,
    )
    result = simulate.run_simulation(dataset, spec, jobs=max(1, args.jobs))

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plot_path = out_dir / "recall.csv"
    plot_path.write_bytes(simulate.emit_plot_data(result))
    doc = simulate.results_document(result, dataset_path=str(path), plot_csv=plot_path.name)
    results_path = out_dir / "results.json"
    results_path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "utf-8")

    print(f"dataset: {path} ({result.n_records} records, {result.n_relevant} relevant)")
    print(f"runs: {spec.n_runs}  master seed: {spec.master_seed}")
    for key, agg in result.aggregates.items():
        label = key.upper().replace("WSS", "WSS@").replace("RRF", "RRF@")
        print(f"  {label}: mean {agg['mean']:.4f}  range [{agg['min']:.4f}, {agg['max']:.4f}]")
    print(f"wrote {results_path} and {plot_path}")
    return 0


def _recompute_run_metrics(run: dict, exclude_priors: bool,
                           wss_levels, rrf_fractions) -> dict[str, float]:
    events = run["events"]
    scored = [e for e in events if e[3] != "prior"] if exclude_priors else events
    labels = [e[2] for e in scored]
    n_relevant = sum(labels)
    curve = simulate.recall_curve(labels, n_relevant)
    out: dict[str, float] = {}
    for level in wss_levels:
        out[f"WSS@{_fmt_level(level)}"] = simulate.wss(curve, level)
    for frac in rrf_fractions:
        out[f"RRF@{_fmt_level(frac)}"] = simulate.rrf(curve, frac)
    return out


def _fmt_level(level: float) -> str:
    pct = level * 100
    return f"{pct:g}"


def cmd_metrics(args) -> int:
    path = Path(args.results)
    try:
        doc = json.loads(path.read_text("utf-8"))
        runs = doc["runs"]
        exclude_priors = doc["protocol"]["exclude_priors_from_metrics"]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: malformed results file: {exc}", file=sys.stderr)
        return 1

    wss_levels = list(simulate.WSS_LEVELS) + [x / 100 for x in args.wss]
    rrf_fractions = list(simulate.RRF_FRACTIONS) + [x / 100 for x in args.rrf]
    try:
        table = [
            _recompute_run_metrics(run, exclude_priors, wss_levels, rrf_fractions)
            for run in runs
        ]
    except (ScreenloopError, ValueError, KeyError, IndexError, TypeError) as exc:
        print(f"error: malformed results file: {exc}", file=sys.stderr)
        return 1

    columns = list(table[0].keys())
    width = max(len(c) for c in columns) + 2
    print("run".ljust(6) + "".join(c.rjust(width) for c in columns))
    for run, row in zip(runs, table):
        cells = "".join(f"{row[c]:.4f}".rjust(width) for c in columns)
        print(str(run["run"]).ljust(6) + cells)
    means = {c: sum(row[c] for row in table) / len(table) for c in columns}
    print("MEAN".ljust(6) + "".join(f"{means[c]:.4f}".rjust(width) for c in columns))
    return 0


def cmd_serve(args) -> int:
    from .service import create_server  # deferred: keeps cold imports light

    data_dir = args.data_dir or os.environ.get("SCREENLOOP_DATA_DIR") or "screenloop_data"
    ui_dir = args.ui_dir or os.environ.get("SCREENLOOP_UI_DIR")
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    try:
        server = create_server(args.host, args.port, Path(data_dir),
                               Path(ui_dir) if ui_dir else None)
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    host, port = server.server_address[:2]
    print(f"screenloop serving on http://{host}:{port}/ (data: {data_dir})", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown_service()
    return 0


def cmd_convert(args) -> int:
    in_path, out_path = Path(args.input), Path(args.output)
    if not in_path.exists():
        print(f"error: input not found: {in_path}", file=sys.stderr)
        return 1
    try:
        dataset = corpus.parse_auto(in_path.read_bytes(), in_path.name)
    except EmptyDataset:
        print("error: no records found", file=sys.stderr)
        return 1
    if out_path.suffix.lower() == ".ris":
        out_path.write_bytes(corpus.write_ris(dataset.records))
    else:
        out_path.write_bytes(corpus.write_csv(dataset.records))
    rejected = dataset.diagnostics.n_rejected
    note = f" ({rejected} rejected)" if rejected else ""
    print(f"wrote {dataset.n_records} records{note} to {out_path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScreenloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
