"""Command-line entry point: ``botsieve {train,classify,synth,serve,bench}``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import socket
import sys
import time
import warnings
from pathlib import Path

from . import datagen, report
from .config import ConfigError, ServiceConfig, load_config
from .dga import CorpusTooSmall, train_bigram
from .dns_model import Ingested, read_raw, read_records, write_csv, write_jsonl
from .forest import ForestParams, SingleClassTraining, evaluate, split_train_test, train_forest
from .pipeline import NotReady, PipelineStats, process_stream, shift_records

log = logging.getLogger("botsieve")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _on_off(value: str) -> bool:
    v = value.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return v == "on"


# --- shared plumbing ----------------------------------------------------------

def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file (MONDEO_* variables override it)")
    p.add_argument("--forest", help="forest model file (default: models.forest from config)")
    p.add_argument("--dga", help="DGA bigram model file (default: models.dga from config)")
    p.add_argument("--whitelist", help="whitelist file")
    p.add_argument("--blacklist", help="blacklist file")
    p.add_argument("--remote-url", help="external DGA scorer URL")
    p.add_argument("--feedback", type=_on_off, default=None, metavar="on|off",
                   help="feed phase 3/4 verdicts back into the lists (default: off)")
    p.add_argument("--allow-feedback-whitelist", action="store_true", default=None,
                   help="let feedback add benign domains to the whitelist")


def _config_from(args) -> ServiceConfig:
    cfg = load_config(args.config)
    for attr, section, key in (("forest", "models", "forest"), ("dga", "models", "dga"),
                               ("whitelist", "lists", "whitelist"), ("blacklist", "lists", "blacklist"),
                               ("remote_url", "dga", "remote_url"), ("feedback", "feedback", "enabled"),
                               ("allow_feedback_whitelist", "feedback", "allow_whitelist")):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(getattr(cfg, section), key, value)
    return cfg.validate()


def _context(args):
    from .service import build_context
    return build_context(_config_from(args))


def _read_input(args) -> Ingested:
    if getattr(args, "sidecar", None):
        ing = read_raw(args.input, args.sidecar)
    else:
        ing = read_records(args.input)
    if ing.errors:
        log.warning("%d input records skipped as invalid", ing.errors)
    return ing


def _parent(path: str | Path) -> Path:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return Path(path)


def _print_summary(snap: dict, out=sys.stdout) -> None:
    total = snap["total"]
    print(f"total={total} benign={snap['benign']} infected={snap['infected']} "
          f"errors={snap['errors']} fallbacks={snap['fallbacks']}", file=out)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(report.PHASE_COLUMNS + ("exit_ratio",))
    for row, ph in zip(report.phase_rows(snap), snap["phases"].values()):
        w.writerow([row[c] for c in report.PHASE_COLUMNS] + [ph["exit_ratio"]])


# --- commands ---------------------------------------------------------------

def cmd_train(args) -> int:
    ing = read_records(args.dataset)
    if ing.errors:
        log.warning("%d dataset rows skipped as invalid", ing.errors)
    if any(lab is None for lab in ing.labels):
        raise ValueError("every dataset row needs a 0/1 label")
    data = datagen.as_dataset(ing.records, ing.labels, provenance=str(args.dataset))
    train, test = split_train_test(data, args.train_fraction, args.seed)
    params = ForestParams(args.n_trees, args.max_depth, args.min_samples_leaf, seed=args.seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingleClassTraining)
        forest = train_forest(train, params)
    for w in caught:
        print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
    metrics = evaluate(forest, test)
    print(metrics.format_table())
    if args.out_forest:
        forest.save(_parent(args.out_forest))
    if args.out_dga:
        corpus = [r.query_name for r, lab in zip(ing.records, ing.labels) if lab == 0 and r.query_name]
        if len(corpus) < 1000:
            print(f"note: only {len(corpus)} benign names in the dataset; "
                  "training the DGA model on the bundled wordlist", file=sys.stderr)
            corpus = datagen.load_wordlist(args.wordlist)
        train_bigram(corpus, smoothing=args.smoothing).save(_parent(args.out_dga))
    if args.metrics_json:
        Path(args.metrics_json).write_text(json.dumps(metrics.to_dict(), indent=2))
    return EXIT_OK


def _save_feedback_lists(cfg: ServiceConfig, ctx) -> None:
    """Write feedback-grown lists back so the next run starts from them."""
    if not cfg.feedback.enabled:
        return
    for kind, path in (("whitelist", cfg.lists.whitelist), ("blacklist", cfg.lists.blacklist)):
        if path:
            ctx.lists.get(kind).save(_parent(path))


def cmd_classify(args) -> int:
    from .service import build_context
    cfg = _config_from(args)
    ctx = build_context(cfg)
    ing = _read_input(args)
    ctx.stats.add_errors(ing.errors)
    try:
        results, _ = process_stream(ing.records, ctx)
    finally:
        ctx.scorer.close()
    _save_feedback_lists(cfg, ctx)
    snap = ctx.stats.snapshot()
    _print_summary(snap)
    if args.output:
        with open(_parent(args.output), "w", encoding="utf-8") as fh:
            for c in results:
                fh.write(json.dumps(c.to_dict(), separators=(",", ":")) + "\n")
    if args.report:
        report.write_phase_csv(snap, _parent(args.report))
        if args.figures and snap["total"]:
            exits_png, latency_png = report.figure_paths(args.report, "exits", "latency")
            label = Path(args.input).stem
            report.plot_exit_ratios({label: snap}, exits_png)
            report.plot_phase_latency({label: snap}, latency_png)
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.kind == "labeled":
        records, labels = datagen.gen_labeled_dataset(args.n, args.seed, args.wordlist)
    else:
        profile = datagen.TrafficProfile(args.kind, args.n, args.seed, args.wordlist,
                                         burst_size=args.burst_size, intra_gap=args.intra_gap,
                                         inter_gap=args.inter_gap, benign_mean_gap=args.benign_gap)
        records, labels = datagen.generate(profile)
    labels_out = None if args.no_labels else labels
    if args.out == "-":
        write_jsonl(records, sys.stdout, labels_out)
    elif _parent(args.out).name.removesuffix(".gz").endswith(".csv"):
        write_csv(records, args.out, labels_out)
    else:
        write_jsonl(records, args.out, labels_out)
    if args.out != "-":
        print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_context, create_app

    cfg = load_config(args.config)
    if args.host:
        cfg.service.host = args.host
    if args.port is not None:
        cfg.service.port = args.port
    cfg.validate()
    ctx = build_context(cfg)
    sock = socket.socket(socket.AF_INET6 if ":" in cfg.service.host else socket.AF_INET)
    try:
        sock.bind((cfg.service.host, cfg.service.port))
    except OSError as exc:
        sock.close()
        print(f"error: cannot bind {cfg.service.host}:{cfg.service.port}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    if not ctx.ready:
        log.warning("models missing: serving in degraded mode")
    server = uvicorn.Server(uvicorn.Config(create_app(ctx, cfg), log_level="info"))
    try:
        server.run(sockets=[sock])
    finally:
        ctx.scorer.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.iterations < 1:
        raise UsageError("--iterations must be >= 1")
    ctx = _context(args)
    ing = _read_input(args)
    records = ing.records
    span = (max(r.timestamp for r in records) - min(r.timestamp for r in records)) if records else 0.0
    rows = []
    overall = PipelineStats()
    total_packets, total_secs = 0, 0.0
    try:
        for i in range(args.iterations):
            batch = shift_records(records, i * (span + 60.0))
            t0 = time.perf_counter()
            results, run = process_stream(batch, ctx)
            secs = time.perf_counter() - t0
            for c in results:
                overall.record(c)
            total_packets += len(results)
            total_secs += secs
            rows.append({"iteration": i + 1, "packets": len(results), "seconds": secs,
                         "packets_per_s": len(results) / secs if secs > 0 else 0.0})
    finally:
        ctx.scorer.close()
    rows.append({"iteration": "aggregate", "packets": total_packets, "seconds": total_secs,
                 "packets_per_s": total_packets / total_secs if total_secs > 0 else 0.0})
    w = csv.DictWriter(sys.stdout, fieldnames=report.BENCH_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    snap = overall.snapshot()
    print()
    _print_summary(snap)
    if args.report:
        report.write_bench_csv(rows, _parent(args.report))
        report.write_latency_csv(snap, Path(args.report).with_name(Path(args.report).stem + "_latency.csv"))
        if args.figures and total_packets:
            tp_png, lat_png, exits_png = report.figure_paths(args.report, "throughput", "latency", "exits")
            report.plot_throughput(rows, tp_png)
            report.plot_phase_latency({"bench": snap}, lat_png)
            report.plot_exit_ratios({"bench": snap}, exits_png)
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="botsieve", description="Multistage DNS botnet detection pipeline.")
    p.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train the forest and DGA models from a labeled dataset")
    t.add_argument("--dataset", required=True, help="labeled JSON Lines or CSV file")
    t.add_argument("--out-forest", help="where to write the forest model")
    t.add_argument("--out-dga", help="where to write the DGA bigram model")
    t.add_argument("--seed", type=int, default=0, help="seed for split and forest (default: 0)")
    t.add_argument("--n-trees", type=int, default=100, help="(default: 100)")
    t.add_argument("--max-depth", type=int, default=16, help="(default: 16)")
    t.add_argument("--min-samples-leaf", type=int, default=2, help="(default: 2)")
    t.add_argument("--train-fraction", type=float, default=0.8, help="(default: 0.8)")
    t.add_argument("--smoothing", type=float, default=0.01, help="bigram add-k constant (default: 0.01)")
    t.add_argument("--wordlist", help="fallback DGA corpus (default: bundled list)")
    t.add_argument("--metrics-json", help="also write the metrics report as JSON")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("classify", help="run a capture through the pipeline")
    c.add_argument("--input", required=True, help="JSON Lines, CSV, or raw message stream")
    c.add_argument("--sidecar", help="capture-context JSON for a raw --input stream")
    _add_model_args(c)
    c.add_argument("--report", help="per-phase CSV; figures are written next to it")
    c.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render PNG figures alongside --report (default: on)")
    c.add_argument("--output", help="per-record classifications as JSON Lines")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("synth", help="generate synthetic DNS request captures")
    s.add_argument("--kind", choices=("benign", "infected", "mixed", "labeled"), default="benign")
    s.add_argument("--n", type=int, default=1000, help="number of records (default: 1000)")
    s.add_argument("--seed", type=int, default=0, help="(default: 0)")
    s.add_argument("--out", default="-", help="output path, .csv/.jsonl[.gz] (default: stdout)")
    s.add_argument("--wordlist", help="benign domain list (default: bundled)")
    s.add_argument("--burst-size", type=int, default=50, help="(default: 50)")
    s.add_argument("--intra-gap", type=float, default=0.01, help="seconds within a burst (default: 0.01)")
    s.add_argument("--inter-gap", type=float, default=30.0, help="seconds between bursts (default: 30)")
    s.add_argument("--benign-gap", type=float, default=0.5, help="mean benign gap, seconds (default: 0.5)")
    s.add_argument("--no-labels", action="store_true", help="omit the label field")
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("serve", help="run the REST service")
    v.add_argument("--config", help="TOML config file")
    v.add_argument("--host", help="override service.host")
    v.add_argument("--port", type=int, help="override service.port")
    v.set_defaults(func=cmd_serve)

    b = sub.add_parser("bench", help="replay a capture and report throughput and latency")
    b.add_argument("--input", required=True)
    b.add_argument("--sidecar", help="capture-context JSON for a raw --input stream")
    b.add_argument("--iterations", type=int, default=1, help="replays, >= 1 (default: 1)")
    _add_model_args(b)
    b.add_argument("--report", help="throughput CSV; latency CSV and figures go next to it")
    b.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render PNG figures alongside --report (default: on)")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"botsieve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, ConfigError, CorpusTooSmall, NotReady) as exc:
        print(f"botsieve: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
