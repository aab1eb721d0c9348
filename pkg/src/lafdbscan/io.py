"""Vector and label file formats.

fvecs: per record, a little-endian int32 dimension ``d`` followed by ``d``
little-endian float32 values; every record has the same ``d``.

labels: CSV with header ``index,label`` and one row per point in index
order; noise is ``-1``, clusters are ``1..k``.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .dbscan import ClusterAssignment
from .vecspace import Dataset

__all__ = [
    "FormatError",
    "atomic_write_text",
    "atomic_write_bytes",
    "load_dataset",
    "read_csv_vectors",
    "read_fvecs",
    "write_fvecs",
    "write_labels",
    "read_labels",
]


class FormatError(ValueError):
    """Malformed input file; the message names the offending line or record."""


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def read_csv_vectors(path) -> np.ndarray:
    rows: list[list[float]] = []
    dim = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric value") from None
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} columns, found {len(values)}"
                )
            rows.append(values)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=np.float64)


def read_fvecs(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data:
        return np.zeros((0, 0), dtype=np.float32)
    if len(data) < 4:
        raise FormatError(f"{path}: record 0: truncated header")
    dim = int(np.frombuffer(data, dtype="<i4", count=1)[0])
    if dim <= 0:
        raise FormatError(f"{path}: record 0: invalid dimension {dim}")
    rec = 4 * (dim + 1)
    if len(data) % rec == 0:
        block = np.frombuffer(data, dtype="<i4").reshape(-1, dim + 1)
        heads = block[:, 0]
        if np.all(heads == dim):
            vecs = np.frombuffer(data, dtype="<f4").reshape(-1, dim + 1)[:, 1:].copy()
            bad = ~np.isfinite(vecs).all(axis=1)
            if bad.any():
                raise FormatError(f"{path}: record {int(np.flatnonzero(bad)[0])}: non-finite value")
            return vecs
    # locate the first inconsistent record
    off, k = 0, 0
    while off < len(data):
        if off + 4 > len(data):
            raise FormatError(f"{path}: record {k}: truncated header")
        d = int(np.frombuffer(data, dtype="<i4", count=1, offset=off)[0])
        if d != dim:
            raise FormatError(f"{path}: record {k}: dimension {d} differs from {dim}")
        if off + rec > len(data):
            raise FormatError(f"{path}: record {k}: truncated vector")
        off += rec
        k += 1
    raise FormatError(f"{path}: inconsistent records")  # pragma: no cover


def write_fvecs(path, vectors) -> None:
    vecs = np.ascontiguousarray(vectors, dtype="<f4")
    if vecs.ndim != 2:
        raise ValueError("vectors must be a 2-d array")
    n, d = vecs.shape
    out = np.empty((n, d + 1), dtype="<f4")
    out[:, 1:] = vecs
    out.view("<i4")[:, 0] = d
    atomic_write_bytes(path, out.tobytes())


def load_dataset(path, format: str | None = None, normalize: bool = True) -> Dataset:
    """Read vectors in file order; ``format`` defaults from the extension."""
    fmt = (format or Path(path).suffix.lstrip(".")).lower()
    if fmt == "csv":
        arr = read_csv_vectors(path)
    elif fmt == "fvecs":
        arr = read_fvecs(path)
    else:
        raise FormatError(f"{path}: unsupported dataset format {fmt!r} (expected csv or fvecs)")
    try:
        return Dataset(arr, normalize=normalize)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_labels(path, assignment) -> None:
    labels = assignment.labels if isinstance(assignment, ClusterAssignment) else np.asarray(assignment)
    lines = ["index,label"]
    lines.extend(f"{i},{int(lab)}" for i, lab in enumerate(labels.tolist()))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_labels(path) -> ClusterAssignment:
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "label"]:
            raise FormatError(f"{path}:1: expected header 'index,label'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                idx, lab = (int(cell) for cell in row)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: expected two integers") from None
            if idx != len(labels):
                raise FormatError(f"{path}:{lineno}: expected index {len(labels)}, got {idx}")
            labels.append(lab)
    return ClusterAssignment(np.array(labels, dtype=np.int64))
