"""Unit-vector storage and the cosine/Euclidean distance helpers."""

from __future__ import annotations

import enum
import math

import numpy as np

__all__ = [
    "Dataset",
    "DistanceMetric",
    "NotNormalizableError",
    "normalize",
    "cosine_distance",
    "euclidean_distance",
    "cos_to_euclidean",
]

NORM_TOLERANCE = 1e-6


class NotNormalizableError(ValueError):
    """Raised for vectors that have no direction (all zeros)."""


class DistanceMetric(str, enum.Enum):
    COSINE = "cosine"
    # plain L2 distance; only meaningful on unit vectors where it equals
    # sqrt(2 * cosine distance)
    EUCLIDEAN_EQUIVALENT = "euclidean-equivalent"

    @classmethod
    def coerce(cls, value) -> "DistanceMetric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown metric {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None

    @property
    def max_distance(self) -> float:
        return 2.0


def normalize(v) -> np.ndarray:
    """Return ``v`` scaled to unit L2 norm (float64)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite components")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise NotNormalizableError("cannot normalize a zero vector")
    return v / norm


def _check_pair(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    return u, v


def cosine_distance(u, v) -> float:
    """``1 - <u, v>`` for unit vectors, clamped into [0, 2]."""
    u, v = _check_pair(u, v)
    d = 1.0 - float(np.dot(u, v))
    return min(max(d, 0.0), 2.0)


def euclidean_distance(u, v) -> float:
    u, v = _check_pair(u, v)
    return float(np.linalg.norm(u - v))


def cos_to_euclidean(d_cos: float) -> float:
    """Euclidean distance between unit vectors whose cosine distance is ``d_cos``."""
    d_cos = float(d_cos)
    if not 0.0 <= d_cos <= 2.0:
        raise ValueError(f"cosine distance must lie in [0, 2], got {d_cos}")
    return math.sqrt(2.0 * d_cos)


class Dataset:
    """Immutable collection of fixed-dimension vectors addressed by index.

    Vectors are stored as float32. Distance kernels read a float64 copy
    that is re-normalized after the float32 round trip, so a vector's
    distance to itself is zero up to 64-bit rounding.

    Parameters
    ----------
    vectors : array-like of shape (n, dim)
    normalize : bool, default=False
        Scale every row to unit norm on ingestion. Zero rows raise
        :class:`NotNormalizableError`.
    """

    __slots__ = ("_vectors", "_compute", "_normalized")

    def __init__(self, vectors, normalize: bool = False):
        arr = np.array(vectors, dtype=np.float64, copy=True)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-d array of vectors, got shape {arr.shape}")
        if arr.shape[0] > 0 and arr.shape[1] == 0:
            raise ValueError("vectors must have at least one component")
        bad = ~np.isfinite(arr).all(axis=1)
        if bad.any():
            raise ValueError(f"vector {int(np.flatnonzero(bad)[0])} has non-finite components")
        if normalize and arr.shape[0]:
            norms = np.linalg.norm(arr, axis=1)
            zero = norms == 0.0
            if zero.any():
                raise NotNormalizableError(
                    f"vector {int(np.flatnonzero(zero)[0])} is zero and cannot be normalized"
                )
            arr = arr / norms[:, None]

        self._vectors = arr.astype(np.float32)
        self._vectors.flags.writeable = False

        compute = self._vectors.astype(np.float64)
        norms = np.linalg.norm(compute, axis=1) if len(compute) else np.zeros(0)
        self._normalized = bool(np.all(np.abs(norms - 1.0) <= NORM_TOLERANCE))
        if self._normalized and len(compute):
            compute /= norms[:, None]
        compute.flags.writeable = False
        self._compute = compute

    @property
    def vectors(self) -> np.ndarray:
        """Read-only float32 array of shape (n, dim)."""
        return self._vectors

    @property
    def compute_vectors(self) -> np.ndarray:
        """Read-only float64 array used by the distance kernels."""
        return self._compute

    @property
    def n(self) -> int:
        return self._vectors.shape[0]

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    @property
    def is_normalized(self) -> bool:
        return self._normalized

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> np.ndarray:
        return self._vectors[i]

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, dim={self.dim}, normalized={self._normalized})"

    def require_normalized(self) -> None:
        if not self._normalized:
            raise ValueError(
                "dataset vectors are not unit-norm; build it with normalize=True"
            )

    def check_index(self, p) -> int:
        if isinstance(p, (bool, np.bool_)) or not isinstance(p, (int, np.integer)):
            raise TypeError(f"point index must be an integer, got {type(p).__name__}")
        p = int(p)
        if not 0 <= p < self.n:
            raise IndexError(f"point index {p} out of range for {self.n} points")
        return p

    def subset(self, indices) -> "Dataset":
        """New dataset holding the given rows in the given order."""
        return Dataset(self._vectors[np.asarray(indices, dtype=np.intp)])
