"""Cosine similarity kernels, database standardization and candidate selection.

Similarities are computed as ``a.b / sqrt((a.a) * (b.b))``. Identical inputs
therefore give exactly 1.0, and the value of a pair depends only on the
two rows involved, never on which other rows are evaluated alongside it.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from .errors import DomainError, ValidationError
from .io import DescriptorSet

MAX_DB_SIZE = 20000
_STD_EPS = 1e-12


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DomainError(f"dimension mismatch: {a.size} vs {b.size}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("non-finite input")
    aa = float(np.dot(a, a))
    bb = float(np.dot(b, b))
    if aa == 0.0 or bb == 0.0:
        raise DomainError("cosine similarity undefined for a zero-norm vector")
    s = float(np.dot(a, b)) / float(np.sqrt(aa * bb))
    return min(1.0, max(-1.0, s))


class RowKernel:
    """Batched cosine similarity of one query against selected database rows.

    Results are bitwise reproducible for a given (row, query) pair whatever
    subset of rows is requested.
    """

    def __init__(self, rows: np.ndarray):
        self.rows = np.ascontiguousarray(rows, dtype=np.float64)
        self.sq_norms = np.einsum("ij,ij->i", self.rows, self.rows)
        if np.any(self.sq_norms == 0.0):
            raise DomainError("zero-norm database row")

    def __len__(self) -> int:
        return self.rows.shape[0]

    def _query(self, q) -> tuple[np.ndarray, float]:
        q = np.asarray(q, dtype=np.float64).ravel()
        if q.size != self.rows.shape[1]:
            raise DomainError(f"query dimension {q.size} != database dimension {self.rows.shape[1]}")
        qq = float(np.dot(q, q))
        if qq == 0.0:
            raise DomainError("zero-norm query")
        return q, qq

    def compare(self, q, indices: np.ndarray) -> np.ndarray:
        q, qq = self._query(q)
        dots = (self.rows[indices] * q).sum(axis=1)
        sims = dots / np.sqrt(self.sq_norms[indices] * qq)
        return np.clip(sims, -1.0, 1.0)

    def compare_all(self, q) -> np.ndarray:
        q, qq = self._query(q)
        dots = (self.rows * q).sum(axis=1)
        return np.clip(dots / np.sqrt(self.sq_norms * qq), -1.0, 1.0)


def standardize(db) -> np.ndarray:
    """Z-score every dimension over the database rows (population std).

    ``db`` is a DescriptorSet or a 2-D array. Dimensions whose std is below
    1e-12 are only mean-centered. The result is a plain array because a row
    equal to the column means legitimately becomes the zero vector.
    """
    x = db.data if isinstance(db, DescriptorSet) else np.asarray(db, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("standardization needs at least 2 database rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std < _STD_EPS, 1.0, std)
    return (x - mean) / scale


def intra_db_matrix(db: DescriptorSet, use_standardization: bool = True) -> np.ndarray:
    """Dense symmetric ``|DB| x |DB|`` cosine-similarity matrix with unit diagonal."""
    if db.count > MAX_DB_SIZE:
        raise DomainError(f"database of {db.count} rows exceeds the dense limit of {MAX_DB_SIZE}")
    x = standardize(db) if use_standardization else db.data
    sq = np.einsum("ij,ij->i", x, x)
    zero = np.flatnonzero(sq <= 0.0)
    if zero.size:
        raise DomainError(f"standardized database row {int(zero[0])} collapses to the zero vector")
    inv = 1.0 / np.sqrt(sq)
    xn = x * inv[:, None]
    sdb = xn @ xn.T
    # xn @ xn.T is not guaranteed bitwise symmetric; mirror block-wise to avoid a full temporary
    _mirror_upper(sdb)
    np.fill_diagonal(sdb, 1.0)
    np.clip(sdb, -1.0, 1.0, out=sdb)
    return sdb


def _mirror_upper(m: np.ndarray, block: int = 512) -> None:
    n = m.shape[0]
    for start in range(0, n, block):
        stop = min(start + block, n)
        # rows [start, stop) to the right of the diagonal block, copied below it
        m[stop:, start:stop] = m[start:stop, stop:].T
        sub = m[start:stop, start:stop]
        iu = np.triu_indices(stop - start, k=1)
        sub.T[iu] = sub[iu]


def upper_triangle(sdb: np.ndarray) -> np.ndarray:
    """Strictly-upper-triangle entries of a square matrix, row by row."""
    n = sdb.shape[0]
    if n < 2:
        return np.empty(0, dtype=sdb.dtype)
    return np.concatenate([sdb[i, i + 1 :] for i in range(n - 1)])


def _column_arrays(column) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(column, Mapping):
        idx = np.fromiter(column.keys(), dtype=np.int64, count=len(column))
        val = np.fromiter(column.values(), dtype=np.float64, count=len(column))
        return idx, val
    idx, val = column
    return np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64)


def k_argmax(column, k: int) -> np.ndarray:
    """Indices of the ``k`` largest present entries, best first.

    ``column`` is a mapping ``db_index -> value`` or an ``(indices, values)``
    pair. Ties go to the smaller index. Fewer than ``k`` entries yields all
    of them; an empty column yields an empty array.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    idx, val = _column_arrays(column)
    if idx.size == 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((idx, -val))
    return idx[order[:k]]


def intra_db_neighbors(sdb: np.ndarray, c: int, theta: float) -> np.ndarray:
    """Sorted database indices ``j`` with ``sdb[j, c] >= theta``."""
    # row c equals column c exactly (see intra_db_matrix) and is contiguous
    return np.flatnonzero(sdb[c] >= theta)
