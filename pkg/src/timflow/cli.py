"""Command-line entry point: every workflow from rasterization to serving.

Subcommands: discretize, compress, gen-dataset, train, search, eval, bench,
serve. Exit codes: 0 success, 1 usage error, 2 runtime error. Seeds are
explicit flags everywhere randomness is involved, so any run can be
reproduced from its command line alone.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .dataset import (Dataset, GeneratorConfig, build_dataset, load_dataset,
                      save_dataset, single_record_dataset)
from .errors import TimFlowError
from .heuristic import CompressionConfig, compress
from .metrics import (benchmark_time, error_summary, summary_row, timing_stats,
                      write_benchmark_csv, write_summary_json)
from .pattern import DispensePattern, GridSpec, TimGrid, discretize, scale_for_gap
from .service import parse_boundary, parse_schedule, serve_forever
from .surrogate import (Hyperparams, SearchBudget, SurrogateModel, forward,
                        hyperparameter_search, load_model, save_model, train)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise UsageError(f"bad resolution {text!r}, expected HxW like 50x50")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split("..")
        return int(lo), int(hi)
    except ValueError:
        raise UsageError(f"bad range {text!r}, expected lo..hi like 1..6")


def _logger(args):
    if getattr(args, "log", None) == "json":
        def emit(event, **fields):
            print(json.dumps({"event": event, **fields}, sort_keys=True),
                  file=sys.stderr)
    else:
        def emit(event, **fields):
            detail = " ".join(f"{k}={v}" for k, v in fields.items())
            print(f"{event} {detail}".strip(), file=sys.stderr)
    return emit


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="timflow",
                     description="Thermal interface material spreading toolkit")
    parser.add_argument("--version", action="version", version=f"timflow {__version__}")
    parser.add_argument("--log", choices=["text", "json"], default="text",
                        help="log format on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discretize", help="rasterize a pattern JSON to a grid file")
    p.add_argument("--pattern", required=True, help="pattern JSON file")
    p.add_argument("--res", default="50x50", help="grid resolution HxW")
    p.add_argument("--out", required=True, help="output TIMD file")

    p = sub.add_parser("compress", help="compress a dispensed grid file")
    p.add_argument("--in", dest="infile", required=True, help="input TIMD file")
    p.add_argument("--model", choices=["heuristic", "surrogate"], default="heuristic")
    p.add_argument("--schedule", default="mult:0.95", help="single | linear:K | mult:F")
    p.add_argument("--boundary", default="error", help="error | crop | crop:M")
    p.add_argument("--gap", type=float, default=1.0, help="final gap height")
    p.add_argument("--weights", help="TIMW weights (required for --model surrogate)")
    p.add_argument("--out", required=True, help="output TIMD file")

    p = sub.add_parser("gen-dataset", help="generate a (dispensed, compressed) dataset")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--res", default="50x50")
    p.add_argument("--segments", default="1..6")
    p.add_argument("--margin", type=int, default=8)
    p.add_argument("--feed-min", type=float, default=0.5)
    p.add_argument("--feed-max", type=float, default=2.0)
    p.add_argument("--max-mass", type=float, default=None)

    p = sub.add_parser("train", help="train the surrogate on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--lr", type=float, required=True)
    p.add_argument("--batch", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output TIMW weights file")
    p.add_argument("--conv-layers", type=int, default=3)
    p.add_argument("--filters", type=int, default=32)
    p.add_argument("--kernel", type=int, default=5)
    p.add_argument("--dense-layers", type=int, default=0)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--train-log", help="write per-epoch JSON lines to this file")

    p = sub.add_parser("search", help="random hyperparameter search")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--train-n", type=int, default=None,
                   help="training subset per trial (default: 80%% of the dataset)")
    p.add_argument("--val-n", type=int, default=None)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--out", help="write the best configuration as JSON")

    p = sub.add_parser("eval", help="mean relative error of weights vs dataset targets")
    p.add_argument("--dataset", required=True)
    p.add_argument("--weights", required=True)

    p = sub.add_parser("bench", help="speed and error benchmark of both models")
    p.add_argument("--patterns", type=int, default=50)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--weights", help="surrogate TIMW weights to benchmark")
    p.add_argument("--res", default="50x50")
    p.add_argument("--schedule", default="mult:0.95")
    p.add_argument("--out-dir", help="write per-pattern CSVs and summary JSON here")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("TIMFLOW_PORT", "8080")))
    p.add_argument("--weights", default=os.environ.get("TIMFLOW_WEIGHTS"))
    p.add_argument("--host", default="0.0.0.0")
    return parser


def _load_pattern_file(path: str) -> DispensePattern:
    with open(path) as f:
        return DispensePattern.from_json(f.read())


def _cmd_discretize(args, emit) -> int:
    pattern = _load_pattern_file(args.pattern)
    grid = discretize(pattern, GridSpec(_parse_resolution(args.res)))
    save_dataset(single_record_dataset(pattern, grid, grid), args.out)
    emit("discretize", cells=int((grid.amounts > 0).sum()), total=grid.total(),
         out=args.out)
    return 0


def _cmd_compress(args, emit) -> int:
    dataset = load_dataset(args.infile)
    record = dataset.records[0]
    dispensed = record.dispensed
    if args.model == "heuristic":
        config = CompressionConfig(termination_height=args.gap,
                                   schedule=parse_schedule(args.schedule),
                                   boundary=parse_boundary(args.boundary))
        result = compress(dispensed.astype(np.float64), config)
        compressed = result.compressed
        emit("compress", model="heuristic", sweeps=result.iterations,
             off_grid_mass=result.off_grid_mass)
    else:
        if not args.weights:
            raise UsageError("--model surrogate requires --weights")
        model = load_model(args.weights)
        out = forward(model, scale_for_gap(dispensed.astype(np.float64), args.gap))
        compressed = TimGrid(out.amounts * args.gap, copy=False)
        emit("compress", model="surrogate", weights=args.weights)
    save_dataset(single_record_dataset(record.pattern, dispensed, compressed),
                 args.out)
    return 0


def _cmd_gen_dataset(args, emit) -> int:
    config = GeneratorConfig(seed=args.seed, count=args.count,
                             resolution=_parse_resolution(args.res),
                             segments=_parse_range(args.segments),
                             margin=args.margin,
                             feed_range=(args.feed_min, args.feed_max),
                             max_total_mass=args.max_mass)
    dataset = build_dataset(config)
    save_dataset(dataset, args.out)
    emit("gen-dataset", count=len(dataset), rejections=dataset.rejections,
         out=args.out)
    return 0


def _split(dataset: Dataset, val_frac: float):
    pairs = dataset.pairs()
    n_val = max(1, int(len(pairs) * val_frac)) if len(pairs) > 1 else 0
    return pairs[:len(pairs) - n_val], pairs[len(pairs) - n_val:]


def _cmd_train(args, emit) -> int:
    dataset = load_dataset(args.dataset)
    train_pairs, val_pairs = _split(dataset, args.val_frac)
    hp = Hyperparams(conv_layers=args.conv_layers, filters=args.filters,
                     kernel=args.kernel, dense_layers=args.dense_layers,
                     batch_size=args.batch, learning_rate=args.lr,
                     epochs=args.epochs)
    sink = open(args.train_log, "w") if args.train_log else None
    try:
        def log_line(line):
            emit("epoch", line=line)
            if sink:
                sink.write(line + "\n")
        model, report = train(train_pairs, val_pairs, hp, seed=args.seed,
                              log=log_line)
    finally:
        if sink:
            sink.close()
    save_model(model, args.out)
    emit("train", best_epoch=report.best_epoch, wall_time_s=round(report.wall_time_s, 3),
         final_val_mre=report.final_val_mre, out=args.out)
    print(json.dumps({"best_epoch": report.best_epoch,
                      "final_val_mre": report.final_val_mre,
                      "train_loss": report.epochs[-1].train_loss,
                      "val_loss": report.epochs[-1].val_loss}, sort_keys=True))
    return 0


def _cmd_search(args, emit) -> int:
    dataset = load_dataset(args.dataset)
    pairs = dataset.pairs()
    train_n = args.train_n if args.train_n is not None else int(len(pairs) * 0.8)
    val_n = args.val_n if args.val_n is not None else len(pairs) - train_n
    budget = SearchBudget(train_n=train_n, val_n=val_n, epochs=args.epochs)
    best, log = hyperparameter_search(pairs, trials=args.trials,
                                      repeats=args.repeats, budget=budget,
                                      seed=args.seed,
                                      log=lambda line: emit("trial", line=line))
    payload = {"conv_layers": best.conv_layers, "filters": best.filters,
               "kernel": best.kernel, "dense_layers": best.dense_layers,
               "batch_size": best.batch_size, "learning_rate": best.learning_rate,
               "best_score": min(r.score for r in log)}
    if args.out:
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def _cmd_eval(args, emit) -> int:
    dataset = load_dataset(args.dataset)
    model = load_model(args.weights)
    pairs = []
    for record in dataset.records:
        prediction = forward(model, record.dispensed.astype(np.float64))
        pairs.append((record.compressed, prediction))
    summary = error_summary(pairs)
    emit("eval", records=len(pairs))
    print(json.dumps({"mean_relative_error": summary.mean_rel,
                      "records": len(pairs)}, sort_keys=True))
    return 0


def _cmd_bench(args, emit) -> int:
    resolution = _parse_resolution(args.res)
    schedule = parse_schedule(args.schedule)
    config = GeneratorConfig(seed=args.seed, count=args.patterns,
                             resolution=resolution)
    emit("bench", stage="generating", patterns=args.patterns)
    dataset = build_dataset(config)  # compressed targets double as references
    grids = [r.dispensed.astype(np.float64) for r in dataset.records]

    heuristic_cfg = CompressionConfig(schedule=schedule)
    heuristic_outputs = [compress(g, heuristic_cfg).compressed for g in grids]
    timing_h = benchmark_time(lambda g: compress(g, heuristic_cfg), grids,
                              n_runs=args.runs)
    # method name, mean relative error vs the heuristic reference, per-pattern
    # absolute/relative errors, timing summary
    reports = [("heuristic", 0.0, [0.0] * len(grids), [0.0] * len(grids), timing_h)]

    if args.weights:
        model = load_model(args.weights)
        if model.resolution != resolution:
            raise TimFlowError(f"weights expect {model.resolution}, bench uses {resolution}")
        surrogate_outputs = [forward(model, g) for g in grids]
        timing_s = benchmark_time(lambda g: forward(model, g), grids,
                                  n_runs=args.runs)
        errors = error_summary(list(zip(heuristic_outputs, surrogate_outputs)))
        reports.append(("surrogate", errors.mean_rel, errors.e_comp, errors.e_rel,
                        timing_s))

    for method, mean_rel, e_comp, e_rel, timing in reports:
        print(f"{method:10s} mean_rel_error={mean_rel:.4f} "
              f"t = {timing.mean * 1e3:.2f} ms +- {timing.std * 1e3:.2f} ms "
              f"(n={timing.n_pat}, runs={timing.n_runs})")
        if args.out_dir:
            os.makedirs(args.out_dir, exist_ok=True)
            write_benchmark_csv(os.path.join(args.out_dir, f"{method}.csv"),
                                list(range(len(grids))), e_comp, e_rel, timing.t_min)
    if args.out_dir:
        write_summary_json(os.path.join(args.out_dir, "summary.json"),
                           [summary_row(m, rel, t) for m, rel, _, _, t in reports])
        emit("bench", out_dir=args.out_dir)
    return 0


def _cmd_serve(args, emit) -> int:
    emit("serve", port=args.port, weights=args.weights or "(none)")
    serve_forever(args.port, args.weights, host=args.host)
    return 0


_COMMANDS = {
    "discretize": _cmd_discretize,
    "compress": _cmd_compress,
    "gen-dataset": _cmd_gen_dataset,
    "train": _cmd_train,
    "search": _cmd_search,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    emit = _logger(args)
    try:
        return _COMMANDS[args.command](args, emit)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except TimFlowError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
