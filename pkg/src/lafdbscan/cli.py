"""Command-line entry point: ``lafdbscan {run,train-estimator,sweep,grid-search}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error. The
``LAFDBSCAN_THREADS`` environment variable caps the BLAS thread pool used
by the distance kernels.
"""

from __future__ import annotations

import argparse
import os
import sys

from threadpoolctl import threadpool_limits

from .bench import (
    ALGORITHMS,
    ConfigError,
    RunConfig,
    execute,
    read_thresholds,
    report_rows,
    tradeoff_sweep,
    train_estimator,
)
from .cardest import DEFAULT_THRESHOLDS, EstimatorConfig, TrainingDivergedError, save_estimator
from .io import FormatError, atomic_write_text, load_dataset, write_labels
from .metrics import parameter_grid_search
from .sampling import EmptySampleError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
THREADS_ENV = "LAFDBSCAN_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _kv_text(rows) -> str:
    return "".join(f"{k}={v}\n" for k, v in rows)


def _add_data_args(p):
    p.add_argument("--input", required=True, help="vector file (csv or fvecs)")
    p.add_argument("--format", choices=["csv", "fvecs"], help="default: from the file extension")
    p.add_argument("--no-normalize", dest="normalize", action="store_false",
                   help="vectors are already unit-norm")
    p.add_argument("--metric", default="cosine", choices=["cosine", "euclidean-equivalent"])


def _add_run_args(p):
    _add_data_args(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="dbscan")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--estimator", choices=EstimatorConfig.KINDS)
    p.add_argument("--model", help="model file for mlp/rmi estimators")
    p.add_argument("--sample-rate", type=float, default=0.1, help="sample estimator rate")
    p.add_argument("--p", type=float, help="DBSCAN++ sample fraction")
    p.add_argument("--delta", type=float, help="DBSCAN++ offset added to the predicted core ratio")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="ground-truth labels file for quality metrics")
    p.add_argument("--noise", choices=["shared", "singleton"], default="shared",
                   help="noise convention for ARI/AMI")
    p.add_argument("--prediction-mode", choices=["batch", "lazy"], default="batch")
    p.add_argument("--unbounded-assignment", action="store_true",
                   help="DBSCAN++: assign outside points to the nearest core at any distance")
    p.add_argument("--timings", action="store_true", help="include wall time in written files")


def _run_config(args) -> RunConfig:
    return RunConfig(
        algorithm=args.algorithm, input=args.input, format=args.format,
        normalize=args.normalize, eps=args.eps, tau=args.tau, alpha=args.alpha,
        metric=args.metric, estimator=args.estimator, model=args.model,
        sample_rate=args.sample_rate, p=args.p, delta=args.delta, seed=args.seed,
        output=getattr(args, "output", None), report=getattr(args, "report", None),
        truth=args.truth, noise=args.noise, prediction_mode=args.prediction_mode,
        unbounded_assignment=args.unbounded_assignment, timings=args.timings,
    )


def cmd_run(args) -> int:
    config = _run_config(args)
    result = execute(config)
    write_labels(args.output, result.assignment)
    rows = report_rows(config, result)
    if args.report:
        atomic_write_text(args.report, _kv_text(rows))
    r = result.report
    print(f"{config.algorithm}: {result.dataset.n} points, "
          f"{result.assignment.num_clusters} clusters, "
          f"{r.executed_queries} range queries executed, {r.skipped_queries} skipped, "
          f"{r.wall_time:.3f}s")
    for key, value in result.quality:
        print(f"  {key} = {value}")
    return EXIT_OK


def cmd_train(args) -> int:
    dataset = load_dataset(args.input, args.format, args.normalize)
    make = EstimatorConfig.desk_scale if not args.full_scale else EstimatorConfig
    overrides = {k: v for k, v in {
        "hidden_widths": args.hidden_widths, "stage_fanout": args.stage_fanout,
        "epochs": args.epochs, "batch_size": args.batch_size,
        "learning_rate": args.learning_rate, "momentum": args.momentum,
    }.items() if v is not None}
    try:
        config = make(kind=args.kind, seed=args.seed, **overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    thresholds = read_thresholds(args.thresholds_file) if args.thresholds_file else DEFAULT_THRESHOLDS
    try:
        result = train_estimator(dataset, config, thresholds, args.train_fraction,
                                 args.per_point_cap, args.metric)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    save_estimator(result.estimator, args.output)
    rows = result.as_rows()
    if args.report:
        atomic_write_text(args.report, _kv_text(rows))
    for key, value in rows:
        print(f"{key}={value}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _run_config(args)
    if args.alphas is not None:
        knob, values = "alpha", args.alphas
    elif args.deltas is not None:
        knob, values = "delta", args.deltas
    else:
        knob, values = "p", args.ps
    rows = tradeoff_sweep(config, knob, values)
    header = ["knob", "value"] + (["wall_time"] if args.timings else []) + \
             ["executed_queries", "ari", "ami"]
    lines = [",".join(header)]
    for row in rows:
        cells = [row.knob, f"{row.value:g}"]
        if args.timings:
            cells.append(f"{row.wall_time:.6f}")
        cells += [str(row.executed_queries), f"{row.ari:.10f}", f"{row.ami:.10f}"]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write_text(args.output, text)
    for row in rows:
        print(f"{row.knob}={row.value:g}  time={row.wall_time:.3f}s  "
              f"queries={row.executed_queries}  ari={row.ari:.4f}  ami={row.ami:.4f}")
    return EXIT_OK


def cmd_grid(args) -> int:
    dataset = load_dataset(args.input, args.format, args.normalize)
    cells = parameter_grid_search(dataset, args.eps_grid, args.tau_grid,
                                  args.max_noise_ratio, args.min_clusters, args.metric)
    lines = ["eps,tau,noise_ratio,num_clusters,qualifies"]
    for c in cells:
        lines.append(f"{c.eps:g},{c.tau},{c.noise_ratio:.6f},{c.num_clusters},{int(c.qualifies)}")
    text = "\n".join(lines) + "\n"
    if args.output:
        atomic_write_text(args.output, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lafdbscan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="cluster a dataset and write labels + report")
    _add_run_args(p)
    p.add_argument("--output", required=True, help="labels CSV to write")
    p.add_argument("--report", help="key=value report file to write")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("train-estimator", help="train and save a learned cardinality estimator")
    _add_data_args(p)
    p.add_argument("--kind", choices=["mlp", "rmi"], default="mlp")
    p.add_argument("--output", required=True, help="model file to write")
    p.add_argument("--report", help="key=value training summary to write")
    p.add_argument("--thresholds-file", help="thresholds separated by commas or whitespace")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--per-point-cap", type=int, help="train on at most this many query points")
    p.add_argument("--full-scale", action="store_true",
                   help="full-size architecture instead of the small default")
    p.add_argument("--hidden-widths", type=_ints)
    p.add_argument("--stage-fanout", type=_ints)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="speed/quality trade-off over alpha, delta or p")
    _add_run_args(p)
    knobs = p.add_mutually_exclusive_group(required=True)
    knobs.add_argument("--alphas", type=_floats)
    knobs.add_argument("--deltas", type=_floats)
    knobs.add_argument("--ps", type=_floats)
    p.add_argument("--output", help="CSV table to write")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grid-search", help="noise ratio and cluster count over (eps, tau)")
    _add_data_args(p)
    p.add_argument("--eps-grid", type=_floats, required=True)
    p.add_argument("--tau-grid", type=_ints, required=True)
    p.add_argument("--max-noise-ratio", type=float, default=0.6)
    p.add_argument("--min-clusters", type=int, default=20)
    p.add_argument("--output", help="CSV table to write")
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get(THREADS_ENV)
    try:
        limit = int(threads) if threads else None
        if limit is not None and limit < 1:
            raise ValueError
    except ValueError:
        print(f"lafdbscan: error: {THREADS_ENV} must be a positive integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with threadpool_limits(limits=limit):
            return args.func(args)
    except (ConfigError, FormatError, EmptySampleError, FileNotFoundError) as exc:
        print(f"lafdbscan: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"lafdbscan: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        print(f"lafdbscan: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
