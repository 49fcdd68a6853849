"""Descriptor, ground-truth, and sparse-similarity file formats.

EPRD binary layout (little-endian)::

    offset  size  field
    0       4     magic b"EPRD"
    4       2     u16 version (= 1)
    6       2     u16 reserved (= 0)
    8       4     u32 count
    12      4     u32 dim
    16      ...   count*dim float32, row-major

Ground truth is a CSV of ``db_index,query_index,label`` lines with
``label`` in {hard, soft}. Sparse similarities are written as
``db_index,query_index,similarity`` with 9 significant digits.
Lines starting with ``#`` are comments in both CSV formats.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import FormatError, IndexRangeError, TruncationError, ValidationError
from .matrix import SparseSimilarityMatrix

MAGIC = b"EPRD"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")

SIM_HEADER = "db_index,query_index,similarity"


@dataclass(eq=False)
class DescriptorSet:
    """Ordered descriptors, one row per image.

    Values are held as float64 but the on-disk precision is float32; use
    :func:`save_descriptors` / :func:`load_descriptors` for exact round trips.
    """

    data: np.ndarray
    role: Literal["database", "query"] = "database"

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 2:
            raise ValidationError(f"descriptor data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValidationError(f"descriptor set needs count >= 1 and dim >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(data), axis=1))[0])
            raise ValidationError(f"non-finite value in row {bad}")
        zero = np.flatnonzero(~np.any(data != 0.0, axis=1))
        if zero.size:
            raise ValidationError(f"row {int(zero[0])} has zero norm")
        if self.role not in ("database", "query"):
            raise ValidationError(f"unknown role {self.role!r}")
        data.setflags(write=False)
        self.data = data

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def __len__(self) -> int:
        return self.count


@dataclass(frozen=True)
class GroundTruth:
    """Required (``hard``) and allowed (``soft``) db/query matches.

    ``soft`` is closed over ``hard`` on construction.
    """

    hard: frozenset[tuple[int, int]] = field(default_factory=frozenset)
    soft: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        hard = frozenset((int(i), int(t)) for i, t in self.hard)
        soft = frozenset((int(i), int(t)) for i, t in self.soft) | hard
        object.__setattr__(self, "hard", hard)
        object.__setattr__(self, "soft", soft)

    def check_range(self, db_count: int, q_count: int) -> None:
        for i, t in self.soft:
            if not (0 <= i < db_count and 0 <= t < q_count):
                raise IndexRangeError(
                    f"ground-truth pair ({i},{t}) outside {db_count}x{q_count}"
                )

    def keys(self, which: Literal["hard", "soft"], q_count: int) -> np.ndarray:
        """Pairs encoded as ``db_index * q_count + query_index``, sorted."""
        pairs = self.hard if which == "hard" else self.soft
        if not pairs:
            return np.empty(0, dtype=np.int64)
        arr = np.array(sorted(pairs), dtype=np.int64)
        return np.sort(arr[:, 0] * q_count + arr[:, 1])


def _as_descriptor_set(obj) -> DescriptorSet:
    return obj if isinstance(obj, DescriptorSet) else DescriptorSet(obj)


def save_descriptors(dset, path: str | Path) -> None:
    """Write ``dset`` (a DescriptorSet or 2-D array) as an EPRD file."""
    dset = _as_descriptor_set(dset)
    payload = dset.data.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValidationError("descriptor values overflow float32")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, 0, dset.count, dset.dim))
        fh.write(payload.tobytes(order="C"))


def load_descriptors(path: str | Path, role: Literal["database", "query"] = "database") -> DescriptorSet:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, version, _reserved, count, dim = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    expected = count * dim * 4
    got = len(raw) - _HEADER.size
    if got != expected:
        raise TruncationError(
            f"{path}: header announces {count}x{dim} floats ({expected} bytes), payload has {got}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
    return DescriptorSet(data, role=role)


def _data_lines(path: str | Path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_ground_truth(path: str | Path, db_count: int, q_count: int) -> GroundTruth:
    hard: set[tuple[int, int]] = set()
    soft: set[tuple[int, int]] = set()
    for lineno, line in _data_lines(path):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            i, t = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer index") from None
        if not (0 <= i < db_count and 0 <= t < q_count):
            raise IndexRangeError(f"{path}:{lineno}: pair ({i},{t}) outside {db_count}x{q_count}")
        label = parts[2].lower()
        if label == "hard":
            hard.add((i, t))
        elif label == "soft":
            soft.add((i, t))
        else:
            raise FormatError(f"{path}:{lineno}: unknown label {parts[2]!r}")
    return GroundTruth(frozenset(hard), frozenset(soft))


def save_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# db_index,query_index,label\n")
        for i, t in sorted(gt.hard, key=lambda p: (p[1], p[0])):
            fh.write(f"{i},{t},hard\n")
        for i, t in sorted(gt.soft - gt.hard, key=lambda p: (p[1], p[0])):
            fh.write(f"{i},{t},soft\n")


def save_sparse_csv(matrix: SparseSimilarityMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SIM_HEADER + "\n")
        for i, t, s in matrix.entries():
            fh.write(f"{i},{t},{s:.9g}\n")


def load_sparse_csv(path: str | Path, db_count: int, q_count: int) -> SparseSimilarityMatrix:
    cols: dict[int, tuple[list[int], list[float]]] = {}
    for lineno, line in _data_lines(path):
        if line == SIM_HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            i, t, s = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: cannot parse {line!r}") from None
        if not (0 <= i < db_count and 0 <= t < q_count):
            raise IndexRangeError(f"{path}:{lineno}: pair ({i},{t}) outside {db_count}x{q_count}")
        idx, val = cols.setdefault(t, ([], []))
        idx.append(i)
        val.append(s)
    matrix = SparseSimilarityMatrix(db_count, q_count)
    for t, (idx, val) in cols.items():
        matrix.set_column(t, idx, val)
    return matrix
