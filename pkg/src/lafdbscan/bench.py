"""Run configuration, single runs, estimator training and trade-off sweeps.

These are the library-level bodies of the CLI subcommands; they take
and return plain objects and never print.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cardest import (
    DEFAULT_THRESHOLDS,
    EstimatorConfig,
    MeanCardinalityEstimator,
    OracleCardinalityEstimator,
    SampleCardinalityEstimator,
    build_training_set,
    load_estimator,
    pairs_to_arrays,
    q_error,
    train,
)
from .dbscan import ClusterAssignment, ClusterParams, dbscan
from .io import load_dataset, read_labels
from .laf import RunReport, laf_dbscan
from .metrics import (
    adjusted_mutual_information,
    adjusted_rand_index,
    cluster_count,
    missed_cluster_report,
    noise_ratio,
)
from .neighbors import QueryCounter
from .sampling import SamplingParams, dbscan_pp, laf_dbscan_pp
from .vecspace import Dataset

__all__ = [
    "ALGORITHMS",
    "ConfigError",
    "RunConfig",
    "RunResult",
    "TrainResult",
    "SweepRow",
    "execute",
    "quality_rows",
    "train_estimator",
    "tradeoff_sweep",
    "read_thresholds",
]

ALGORITHMS = ("dbscan", "laf-dbscan", "dbscan++", "laf-dbscan++")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    algorithm: str = "dbscan"
    input: str | None = None
    format: str | None = None
    normalize: bool = True
    eps: float = 0.5
    tau: int = 5
    alpha: float = 1.0
    metric: str = "cosine"
    estimator: str | None = None  # oracle | sample | mlp | rmi
    model: str | None = None
    sample_rate: float = 0.1
    p: float | None = None
    delta: float | None = None
    seed: int = 0
    output: str | None = None
    report: str | None = None
    truth: str | None = None
    noise: str = "shared"
    prediction_mode: str = "batch"
    unbounded_assignment: bool = False
    timings: bool = False

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.algorithm.startswith("laf") and not self.estimator:
            raise ConfigError(f"{self.algorithm} requires --estimator")
        if self.estimator and self.estimator not in EstimatorConfig.KINDS:
            raise ConfigError(f"unknown estimator kind {self.estimator!r}")
        if self.estimator in ("mlp", "rmi") and not self.model:
            raise ConfigError(f"estimator kind {self.estimator!r} requires --model")
        if self.algorithm.endswith("++"):
            if self.p is None and self.delta is None:
                raise ConfigError(f"{self.algorithm} requires --p or --delta")
            if self.p is None and not self.estimator:
                raise ConfigError("--delta derives p from predicted core points and needs --estimator")
        try:
            self.params()
            if self.algorithm.endswith("++"):
                self.sampling()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def params(self) -> ClusterParams:
        return ClusterParams(eps=self.eps, tau=self.tau, alpha=self.alpha, metric=self.metric)

    def sampling(self) -> SamplingParams:
        auto = self.p is None
        return SamplingParams(
            p=1.0 if auto else self.p,
            delta=0.0 if self.delta is None else self.delta,
            seed=self.seed, auto_p=auto,
            unbounded_assignment=self.unbounded_assignment,
        )


@dataclass
class RunResult:
    assignment: ClusterAssignment
    report: RunReport
    dataset: Dataset
    quality: list[tuple[str, object]] = field(default_factory=list)


def build_estimator(config: RunConfig, dataset: Dataset):
    kind = config.estimator
    if kind is None:
        return None
    if kind == "oracle":
        return OracleCardinalityEstimator(metric=config.metric).fit(dataset)
    if kind == "sample":
        return SampleCardinalityEstimator(config.sample_rate, config.seed, config.metric).fit(dataset)
    return load_estimator(config.model, expected_dim=dataset.dim)


def run_algorithm(config: RunConfig, dataset: Dataset, estimator=None):
    params = config.params()
    if config.algorithm == "dbscan":
        started = time.perf_counter()
        counter = QueryCounter()
        result = dbscan(dataset, params, counter)
        return result, RunReport(executed_queries=counter.value,
                                 wall_time=time.perf_counter() - started)
    if config.algorithm == "laf-dbscan":
        return laf_dbscan(dataset, params, estimator, prediction_mode=config.prediction_mode)
    if config.algorithm == "dbscan++":
        return dbscan_pp(dataset, params, config.sampling(), estimator)
    return laf_dbscan_pp(dataset, params, config.sampling(), estimator)


def quality_rows(truth: ClusterAssignment, pred: ClusterAssignment, noise="shared"):
    rows = [
        ("ari", f"{adjusted_rand_index(truth, pred, noise):.10f}"),
        ("ami", f"{adjusted_mutual_information(truth, pred, noise):.10f}"),
    ]
    rows.extend(missed_cluster_report(truth, pred).as_rows())
    return rows


def reference_labels(config: RunConfig, dataset: Dataset) -> ClusterAssignment:
    if config.truth:
        truth = read_labels(config.truth)
        if len(truth) != dataset.n:
            raise ConfigError(
                f"ground-truth file has {len(truth)} labels for {dataset.n} points"
            )
        return truth
    return dbscan(dataset, config.params())


def execute(config: RunConfig, dataset: Dataset | None = None) -> RunResult:
    config.validate()
    if dataset is None:
        if not config.input:
            raise ConfigError("no input dataset given")
        dataset = load_dataset(config.input, config.format, config.normalize)
    estimator = build_estimator(config, dataset)
    assignment, report = run_algorithm(config, dataset, estimator)
    result = RunResult(assignment, report, dataset)
    if config.truth:
        result.quality = quality_rows(reference_labels(config, dataset), assignment, config.noise)
    return result


def report_rows(config: RunConfig, result: RunResult) -> list[tuple[str, object]]:
    rows = [
        ("algorithm", config.algorithm),
        ("n", result.dataset.n),
        ("dim", result.dataset.dim),
        ("eps", config.eps),
        ("tau", config.tau),
    ]
    if config.algorithm.startswith("laf"):
        rows.append(("alpha", config.alpha))
        rows.append(("estimator", config.estimator))
    if config.algorithm.endswith("++"):
        rows.append(("seed", config.seed))
    rows.append(("num_clusters", cluster_count(result.assignment)))
    rows.append(("noise_ratio", f"{noise_ratio(result.assignment):.10f}"))
    rows.extend(result.report.as_rows(timings=config.timings))
    rows.extend(result.quality)
    return rows


# ------------------------------------------------------------ training


def read_thresholds(path) -> list[float]:
    text = Path(path).read_text()
    values = [float(tok) for tok in text.replace(",", " ").split()]
    if not values:
        raise ConfigError(f"{path}: no thresholds found")
    return values


@dataclass
class TrainResult:
    estimator: object
    total_pairs: int
    train_pairs: int
    heldout_pairs: int
    final_loss: float
    heldout_qerror: float
    baseline_qerror: float

    def as_rows(self) -> list[tuple[str, object]]:
        return [
            ("pairs", self.total_pairs),
            ("train_pairs", self.train_pairs),
            ("heldout_pairs", self.heldout_pairs),
            ("final_train_loss", f"{self.final_loss:.8f}"),
            ("heldout_mean_qerror", f"{self.heldout_qerror:.6f}"),
            ("baseline_mean_qerror", f"{self.baseline_qerror:.6f}"),
        ]


def train_estimator(
    dataset: Dataset,
    config: EstimatorConfig,
    thresholds=DEFAULT_THRESHOLDS,
    train_fraction: float = 0.8,
    per_point_cap: int | None = None,
    metric="cosine",
) -> TrainResult:
    """Train a learned estimator on a seeded point split.

    Query points are split ``train_fraction`` / rest; counts for both
    sides are taken against the whole dataset. Held-out mean q-error is
    compared with a constant predictor of the mean training count.
    """
    if config.kind not in ("mlp", "rmi"):
        raise ConfigError("only mlp and rmi estimators are trained")
    if not 0.0 < train_fraction <= 1.0:
        raise ConfigError(f"train fraction must lie in (0, 1], got {train_fraction}")
    n = dataset.n
    if n == 0:
        raise ConfigError("empty dataset")
    order = np.random.default_rng(config.seed).permutation(n)
    n_train = max(1, int(round(train_fraction * n)))
    train_idx, test_idx = np.sort(order[:n_train]), np.sort(order[n_train:])

    train_pairs = build_training_set(dataset, thresholds, per_point_cap, config.seed,
                                     points=train_idx, metric=metric)
    test_pairs = (build_training_set(dataset, thresholds, points=test_idx, metric=metric)
                  if test_idx.size else [])
    estimator = train(config, train_pairs)

    X_tr, y_tr = pairs_to_arrays(train_pairs)
    baseline = MeanCardinalityEstimator().fit(X_tr, y_tr)
    if test_pairs:
        X_te, y_te = pairs_to_arrays(test_pairs)
    else:
        X_te, y_te = X_tr, y_tr
    q_model = float(np.mean(q_error(estimator.predict(X_te), y_te)))
    q_base = float(np.mean(q_error(baseline.predict(X_te), y_te)))
    return TrainResult(estimator, len(train_pairs) + len(test_pairs), len(train_pairs),
                       len(test_pairs), estimator.final_loss_, q_model, q_base)


# ------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepRow:
    knob: str
    value: float
    wall_time: float
    executed_queries: int
    ari: float
    ami: float


def tradeoff_sweep(config: RunConfig, knob: str, values, dataset: Dataset | None = None,
                   truth: ClusterAssignment | None = None) -> list[SweepRow]:
    """One run per knob value (``alpha`` or ``delta``), scored against ground truth.

    Ground truth is ``truth``, else ``config.truth``, else a reference
    DBSCAN run with the same ``eps``/``tau``. The estimator is loaded once
    and shared by every run.
    """
    if knob not in ("alpha", "delta", "p"):
        raise ConfigError(f"sweep knob must be alpha, delta or p, got {knob!r}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("empty sweep list")
    configs = []
    for v in values:
        cfg = replace(config, **{knob: v})
        if knob == "delta":
            cfg = replace(cfg, p=None)
        cfg.validate()
        configs.append(cfg)
    if dataset is None:
        dataset = load_dataset(config.input, config.format, config.normalize)
    if truth is None:
        truth = reference_labels(config, dataset)
    estimator = build_estimator(config, dataset)
    rows = []
    for v, cfg in zip(values, configs):
        assignment, report = run_algorithm(cfg, dataset, estimator)
        rows.append(SweepRow(
            knob, v, report.wall_time, report.executed_queries,
            adjusted_rand_index(truth, assignment, config.noise),
            adjusted_mutual_information(truth, assignment, config.noise),
        ))
    return rows
