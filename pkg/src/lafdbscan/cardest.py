"""Cardinality estimators for cosine range queries.

An estimator answers "how many dataset points lie within ``eps`` of this
point?" without running the query. Four implementations share one
interface:

* :class:`OracleCardinalityEstimator` counts exactly (a full scan that
  does not touch the benchmark query counter);
* :class:`SampleCardinalityEstimator` counts inside a uniform sample and
  rescales;
* :class:`MLPCardinalityEstimator` and :class:`RMICardinalityEstimator`
  are learned regressors on ``(point, eps)``.

All of them follow the scikit-learn estimator protocol. ``fit(X, y)`` /
``predict(X)`` take feature rows whose last column is the threshold, so
the learned models compose with sklearn tooling; :meth:`estimate` is the
``(points, eps)`` form the clustering code calls.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .io import FormatError, atomic_write_bytes
from ._mlp import Network, TrainingDivergedError, fit_network
from .neighbors import QueryCounter, distances_to
from .vecspace import Dataset, DistanceMetric

__all__ = [
    "DEFAULT_THRESHOLDS",
    "EstimatorConfig",
    "TrainingPair",
    "TrainingDivergedError",
    "CardinalityEstimator",
    "OracleCardinalityEstimator",
    "SampleCardinalityEstimator",
    "MeanCardinalityEstimator",
    "MLPCardinalityEstimator",
    "RMICardinalityEstimator",
    "oracle_predict",
    "build_training_set",
    "pairs_to_arrays",
    "train",
    "make_estimator",
    "predict",
    "q_error",
    "save_estimator",
    "load_estimator",
]

DEFAULT_THRESHOLDS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass(frozen=True)
class TrainingPair:
    point: np.ndarray
    eps: float
    true_count: int


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator kind and training hyper-parameters.

    Field defaults are the full-size architecture (three RMI stages of
    1, 2 and 4 networks with hidden widths 512-512-256-128, 200 epochs,
    batch 512). :meth:`desk_scale` is the small configuration used by the
    CLI and the test-suite.
    """

    kind: str = "rmi"
    sample_rate: float = 0.1
    hidden_widths: tuple[int, ...] = (512, 512, 256, 128)
    stage_fanout: tuple[int, ...] = (1, 2, 4)
    epochs: int = 200
    batch_size: int = 512
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    KINDS = ("oracle", "sample", "mlp", "rmi")

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        object.__setattr__(self, "stage_fanout", tuple(int(f) for f in self.stage_fanout))
        self.validate()

    @classmethod
    def desk_scale(cls, kind: str = "mlp", **overrides) -> "EstimatorConfig":
        base = cls(kind=kind, hidden_widths=(64, 32), stage_fanout=(1, 2))
        return replace(base, **overrides) if overrides else base

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}; expected one of {self.KINDS}")
        if not 0.0 < self.sample_rate <= 1.0:
            raise ValueError(f"sample_rate must lie in (0, 1], got {self.sample_rate}")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden widths must be positive")
        if not self.stage_fanout or any(f < 1 for f in self.stage_fanout):
            raise ValueError("stage_fanout must be a non-empty list of positive integers")
        if self.stage_fanout[0] != 1:
            raise ValueError("the first RMI stage must hold exactly one model")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_widths"] = list(self.hidden_widths)
        d["stage_fanout"] = list(self.stage_fanout)
        return d


def q_error(pred, true) -> np.ndarray:
    """``max(pred/true, true/pred)`` with both sides floored at 1."""
    pred = np.maximum(np.asarray(pred, dtype=np.float64), 1.0)
    true = np.maximum(np.asarray(true, dtype=np.float64), 1.0)
    return np.maximum(pred / true, true / pred)


def _as_dataset(X) -> Dataset:
    if isinstance(X, Dataset):
        return X
    return Dataset(check_array(X, dtype=np.float64))


def _split_features(X):
    X = check_array(X, dtype=np.float64)
    if X.shape[1] < 2:
        raise ValueError("feature rows need at least one vector component plus the threshold")
    return X[:, :-1], X[:, -1]


class CardinalityEstimator(BaseEstimator):
    """Base class. Subclasses implement ``_estimate(points, eps_array)``."""

    def estimate(self, points, eps) -> np.ndarray:
        """Estimated neighbour counts for each row of ``points`` at ``eps``."""
        check_is_fitted(self, "dim_")
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.dim_:
            raise ValueError(
                f"dimension mismatch: estimator expects {self.dim_}, got {points.shape[1]}"
            )
        eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (points.shape[0],))
        out = self._estimate(points, eps)
        return np.maximum(out, 0.0)

    def predict(self, X) -> np.ndarray:
        points, eps = _split_features(X)
        return self.estimate(points, eps)

    def _estimate(self, points, eps):
        raise NotImplementedError


class OracleCardinalityEstimator(CardinalityEstimator):
    """Exact counts by full scan; keeps its own query counter.

    Parameters
    ----------
    metric : str, default="cosine"
    """

    def __init__(self, metric="cosine"):
        self.metric = metric

    def fit(self, X, y=None):
        self.dataset_ = _as_dataset(X)
        self.dim_ = self.dataset_.dim
        self.counter_ = QueryCounter()
        return self

    @property
    def n_queries_(self) -> int:
        return self.counter_.value

    def _estimate(self, points, eps):
        vectors = self.dataset_.compute_vectors
        out = np.empty(len(points))
        for i, (v, e) in enumerate(zip(points, eps)):
            out[i] = np.count_nonzero(distances_to(vectors, v, self.metric) < e)
        self.counter_.increment(len(points))
        return out

    def count_at(self, index: int, eps: float) -> int:
        index = self.dataset_.check_index(index)
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        return int(self._estimate(self.dataset_.compute_vectors[index][None, :], [eps])[0])


def oracle_predict(dataset: Dataset, index, eps, metric="cosine") -> int:
    """Exact range-query cardinality of point ``index`` (counter untouched)."""
    return OracleCardinalityEstimator(metric=metric).fit(dataset).count_at(index, eps)


class SampleCardinalityEstimator(CardinalityEstimator):
    """Count within a uniform sample of ``ceil(sample_rate * n)`` points, scaled by ``n / m``.

    The scaling makes the estimate unbiased over the choice of sample.
    """

    def __init__(self, sample_rate=0.1, seed=0, metric="cosine"):
        self.sample_rate = sample_rate
        self.seed = seed
        self.metric = metric

    def fit(self, X, y=None):
        if not 0.0 < self.sample_rate <= 1.0:
            raise ValueError(f"sample_rate must lie in (0, 1], got {self.sample_rate}")
        data = _as_dataset(X)
        n = data.n
        if n == 0:
            raise ValueError("cannot sample from an empty dataset")
        m = max(1, int(np.ceil(self.sample_rate * n)))
        rng = np.random.default_rng(self.seed)
        self.sample_indices_ = np.sort(rng.choice(n, size=m, replace=False))
        self.sample_vectors_ = data.compute_vectors[self.sample_indices_]
        self.scale_ = n / m
        self.dim_ = data.dim
        return self

    def _estimate(self, points, eps):
        out = np.empty(len(points))
        for i, (v, e) in enumerate(zip(points, eps)):
            out[i] = np.count_nonzero(distances_to(self.sample_vectors_, v, self.metric) < e)
        return out * self.scale_


class MeanCardinalityEstimator(CardinalityEstimator, RegressorMixin):
    """Predicts the mean training count everywhere; the q-error baseline."""

    def fit(self, X, y):
        points, _ = _split_features(X)
        self.dim_ = points.shape[1]
        self.mean_ = float(np.mean(y))
        return self

    def _estimate(self, points, eps):
        return np.full(len(points), self.mean_)


class MLPCardinalityEstimator(CardinalityEstimator, RegressorMixin):
    """Fully-connected regressor of ``log(1 + count)`` on ``(point, eps)``.

    Parameters
    ----------
    hidden_widths : sequence of int
    epochs, batch_size : int
    learning_rate, momentum : float
        Plain mini-batch SGD with heavy-ball momentum and a fixed rate.
    seed : int
        Seeds weight initialization and batch shuffling.
    """

    def __init__(self, hidden_widths=(64, 32), epochs=200, batch_size=512,
                 learning_rate=0.01, momentum=0.9, seed=0):
        self.hidden_widths = hidden_widths
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(X) == 0:
            raise ValueError("no training pairs")
        if y.shape != (len(X),):
            raise ValueError("y must hold one count per feature row")
        rng = np.random.default_rng(self.seed)
        self.network_, self.loss_history_ = fit_network(
            X, np.log1p(y), tuple(self.hidden_widths),
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, momentum=self.momentum, rng=rng,
        )
        self.final_loss_ = float(self.loss_history_[-1])
        self.dim_ = X.shape[1] - 1
        return self

    def _estimate(self, points, eps):
        out = self.network_.forward(np.column_stack([points, eps]))
        return np.expm1(out)


class RMICardinalityEstimator(CardinalityEstimator, RegressorMixin):
    """Recursive model index of MLPs; every stage sees ``(point, eps)``.

    Stage ``i`` holds ``stage_fanout[i]`` networks. A stage's output (in
    log-count space) is mapped linearly from the training target range
    onto ``[0, fanout)`` and floored to choose one network of the next
    stage; the last stage's output is the estimate.
    """

    def __init__(self, stage_fanout=(1, 2), hidden_widths=(64, 32), epochs=200,
                 batch_size=512, learning_rate=0.01, momentum=0.9, seed=0):
        self.stage_fanout = stage_fanout
        self.hidden_widths = hidden_widths
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.seed = seed

    def _fit_one(self, X, t, seed):
        net, hist = fit_network(
            X, t, tuple(self.hidden_widths),
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, momentum=self.momentum,
            rng=np.random.default_rng(seed),
        )
        return net, hist

    def fit(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if len(X) == 0:
            raise ValueError("no training pairs")
        fanout = [int(f) for f in self.stage_fanout]
        if not fanout or fanout[0] != 1 or min(fanout) < 1:
            raise ValueError("stage_fanout must start with 1 and be positive")
        t = np.log1p(y)
        self.target_range_ = np.array([t.min(), t.max()], dtype=np.float32)
        self.stages_ = []
        self.loss_history_ = []
        route = np.zeros(len(X), dtype=np.intp)
        for s, width in enumerate(fanout):
            models = []
            for j in range(width):
                rows = np.flatnonzero(route == j)
                if rows.size == 0:
                    # unreachable on the training data; fall back to all rows
                    rows = np.arange(len(X))
                net, hist = self._fit_one(X[rows], t[rows], self.seed + 1009 * s + j)
                models.append(net)
                self.loss_history_.append(hist)
            self.stages_.append(models)
            if s + 1 < len(fanout):
                route = self._route(X, route, s, fanout[s + 1])
        leaf = self.loss_history_[-fanout[-1]:]
        self.final_loss_ = float(np.mean([h[-1] for h in leaf]))
        self.dim_ = X.shape[1] - 1
        return self

    def _route(self, Z, route, stage, next_width):
        out = np.empty(len(Z))
        for j, net in enumerate(self.stages_[stage]):
            rows = route == j
            if rows.any():
                out[rows] = net.forward(Z[rows])
        lo, hi = (float(v) for v in self.target_range_)
        span = hi - lo if hi > lo else 1.0
        pos = np.floor((out - lo) / span * next_width)
        return np.clip(pos, 0, next_width - 1).astype(np.intp)

    def leaf_index(self, points, eps) -> np.ndarray:
        """Index of the last-stage network each input is routed to."""
        check_is_fitted(self, "stages_")
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (points.shape[0],))
        Z = np.column_stack([points, eps])
        route = np.zeros(len(Z), dtype=np.intp)
        for s in range(len(self.stages_) - 1):
            route = self._route(Z, route, s, len(self.stages_[s + 1]))
        return route

    def _estimate(self, points, eps):
        Z = np.column_stack([points, eps])
        route = self.leaf_index(points, eps)
        out = np.empty(len(Z))
        for j, net in enumerate(self.stages_[-1]):
            rows = route == j
            if rows.any():
                out[rows] = net.forward(Z[rows])
        return np.expm1(out)


# ---------------------------------------------------------------- training


def build_training_set(
    dataset: Dataset,
    thresholds=DEFAULT_THRESHOLDS,
    per_point_cap: int | None = None,
    seed: int = 0,
    points=None,
    metric="cosine",
) -> list[TrainingPair]:
    """Exact ``(point, eps, count)`` pairs for every selected point and threshold.

    Counts are taken against the whole ``dataset``. ``points`` restricts
    the query points to the given indices (e.g. a train split);
    ``per_point_cap`` keeps a seeded random subset of at most that many
    query points.
    """
    if dataset.n == 0:
        raise ValueError("cannot build training pairs from an empty dataset")
    thresholds = [float(e) for e in thresholds]
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    for e in thresholds:
        if not 0.0 < e < 2.0:
            raise ValueError(f"threshold {e} outside (0, 2)")
    idx = np.arange(dataset.n) if points is None else np.asarray(points, dtype=np.intp)
    if per_point_cap is not None:
        if per_point_cap < 1:
            raise ValueError("per_point_cap must be positive")
        if per_point_cap < len(idx):
            rng = np.random.default_rng(seed)
            idx = np.sort(rng.choice(idx, size=per_point_cap, replace=False))

    vectors = dataset.compute_vectors
    eps_arr = np.asarray(thresholds)
    pairs = []
    for i in idx.tolist():
        d = distances_to(vectors, vectors[i], metric)
        counts = (d[None, :] < eps_arr[:, None]).sum(axis=1)
        point = dataset.vectors[i]
        for e, c in zip(thresholds, counts.tolist()):
            pairs.append(TrainingPair(point, e, int(c)))
    return pairs


def pairs_to_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    """Stack pairs into ``X = [point | eps]`` rows and a count vector."""
    if not pairs:
        raise ValueError("no training pairs")
    X = np.array([np.append(p.point.astype(np.float64), p.eps) for p in pairs])
    y = np.array([p.true_count for p in pairs], dtype=np.float64)
    return X, y


def _learned_from_config(config: EstimatorConfig):
    common = dict(
        hidden_widths=config.hidden_widths, epochs=config.epochs,
        batch_size=config.batch_size, learning_rate=config.learning_rate,
        momentum=config.momentum, seed=config.seed,
    )
    if config.kind == "mlp":
        return MLPCardinalityEstimator(**common)
    return RMICardinalityEstimator(stage_fanout=config.stage_fanout, **common)


def train(config: EstimatorConfig, pairs) -> CardinalityEstimator:
    """Fit a learned estimator (``mlp`` or ``rmi`` kind) on training pairs."""
    config.validate()
    if config.kind not in ("mlp", "rmi"):
        raise ValueError(f"{config.kind!r} estimators are built from data; use make_estimator")
    X, y = pairs_to_arrays(pairs)
    return _learned_from_config(config).fit(X, y)


def make_estimator(config: EstimatorConfig, dataset: Dataset | None = None, pairs=None,
                   metric="cosine"):
    """Build any estimator kind: oracle/sample need ``dataset``, learned kinds ``pairs``."""
    if config.kind == "oracle":
        return OracleCardinalityEstimator(metric=metric).fit(dataset)
    if config.kind == "sample":
        return SampleCardinalityEstimator(config.sample_rate, config.seed, metric).fit(dataset)
    return train(config, pairs)


def predict(estimator, point, eps) -> float:
    """Estimated cardinality of a single point."""
    return float(estimator.estimate(np.asarray(point)[None, :], eps)[0])


# ---------------------------------------------------------------- model file
#
# layout (all integers and reals little-endian):
#   8 bytes   magic b"LAFCARD\0"
#   1 byte    format version (1)
#   4 bytes   uint32 header length H
#   H bytes   UTF-8 JSON header: kind, dim, config, target_range (rmi),
#             stages (list of network counts), arrays [{name, shape}, ...]
#   rest      float32 arrays in header order, C-contiguous

MAGIC = b"LAFCARD\x00"
FORMAT_VERSION = 1


def save_estimator(estimator, path) -> None:
    """Serialize a fitted MLP or RMI estimator."""
    if isinstance(estimator, RMICardinalityEstimator):
        check_is_fitted(estimator, "stages_")
        kind = "rmi"
        nets = [net for stage in estimator.stages_ for net in stage]
        stages = [len(stage) for stage in estimator.stages_]
        extra = [("target_range", estimator.target_range_)]
    elif isinstance(estimator, MLPCardinalityEstimator):
        check_is_fitted(estimator, "network_")
        kind, nets, stages, extra = "mlp", [estimator.network_], [1], []
    else:
        raise TypeError(f"cannot serialize {type(estimator).__name__}")

    arrays = list(extra)
    for k, net in enumerate(nets):
        arrays.extend((f"net{k}.{name}", arr) for name, arr in net.arrays())
    header = {
        "kind": kind,
        "dim": int(estimator.dim_),
        "params": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in estimator.get_params().items()},
        "stages": stages,
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BI", FORMAT_VERSION, len(hbytes)))
    buf.write(hbytes)
    for _, arr in arrays:
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_estimator(path, expected_dim: int | None = None):
    """Read a model file written by :func:`save_estimator`.

    Raises :class:`~lafdbscan.io.FormatError` on a corrupt file or when
    ``expected_dim`` is given and differs from the stored dimension.
    """
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a cardinality model file")
    try:
        return _decode_model(data, expected_dim)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None
    except (struct.error, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: corrupt model file ({exc})") from None


def _decode_model(data: bytes, expected_dim):
    version, hlen = struct.unpack_from("<BI", data, 8)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    off = 13
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    if expected_dim is not None and header["dim"] != expected_dim:
        raise FormatError(
            f"model dimension {header['dim']} does not match data dimension {expected_dim}"
        )
    arrays = {}
    for spec in header["arrays"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=off)
        arrays[spec["name"]] = arr.reshape(spec["shape"]).astype(np.float32)
        off += 4 * count
    if off != len(data):
        raise FormatError("trailing or missing bytes in model file")

    def net(k):
        prefix = f"net{k}."
        return Network.from_arrays(
            {name[len(prefix):]: a for name, a in arrays.items() if name.startswith(prefix)}
        )

    params = header["params"]
    for key in ("hidden_widths", "stage_fanout"):
        if key in params:
            params[key] = tuple(params[key])
    if header["kind"] == "mlp":
        est = MLPCardinalityEstimator(**params)
        est.network_ = net(0)
    elif header["kind"] == "rmi":
        est = RMICardinalityEstimator(**params)
        est.target_range_ = arrays["target_range"]
        stages, k = [], 0
        for width in header["stages"]:
            stages.append([net(k + j) for j in range(width)])
            k += width
        est.stages_ = stages
    else:
        raise FormatError(f"unknown model kind {header['kind']!r}")
    est.dim_ = header["dim"]
    return est
