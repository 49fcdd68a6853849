"""Column-wise sparse storage for database-vs-query similarities."""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexRangeError, ValidationError

_EMPTY_IDX = np.empty(0, dtype=np.int64)
_EMPTY_VAL = np.empty(0, dtype=np.float64)


@dataclass(eq=False)
class SparseSimilarityMatrix:
    """``db_count x q_count`` matrix in which only evaluated pairs hold values.

    Each query column is kept as a pair of arrays (sorted db indices,
    similarities). Columns that were never set are empty.
    """

    db_count: int
    q_count: int
    _indices: list[np.ndarray] = field(default_factory=list, repr=False)
    _values: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if self.db_count < 1 or self.q_count < 1:
            raise ValidationError("matrix dimensions must be positive")
        if not self._indices:
            self._indices = [_EMPTY_IDX] * self.q_count
            self._values = [_EMPTY_VAL] * self.q_count

    def set_column(self, t: int, indices, values) -> None:
        if not 0 <= t < self.q_count:
            raise IndexRangeError(f"query index {t} outside [0, {self.q_count})")
        idx = np.asarray(indices, dtype=np.int64)
        val = np.asarray(values, dtype=np.float64)
        if idx.shape != val.shape or idx.ndim != 1:
            raise ValidationError("indices and values must be 1-D arrays of equal length")
        if idx.size and (idx.min() < 0 or idx.max() >= self.db_count):
            raise IndexRangeError(f"db index outside [0, {self.db_count}) in column {t}")
        order = np.argsort(idx, kind="stable")
        idx, val = idx[order], val[order]
        if idx.size > 1 and np.any(idx[1:] == idx[:-1]):
            raise ValidationError(f"duplicate db index in column {t}")
        if np.any(np.abs(val) > 1.0) or not np.all(np.isfinite(val)):
            raise ValidationError(f"similarity outside [-1, 1] in column {t}")
        self._indices[t] = idx
        self._values[t] = val

    def column(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        return self._indices[t], self._values[t]

    def column_dict(self, t: int) -> dict[int, float]:
        idx, val = self.column(t)
        return dict(zip(idx.tolist(), val.tolist()))

    @property
    def nnz(self) -> int:
        return sum(int(i.size) for i in self._indices)

    @property
    def density_pct(self) -> float:
        return 100.0 * self.nnz / (self.db_count * self.q_count)

    def entries(self) -> Iterator[tuple[int, int, float]]:
        """Yield ``(db_index, query_index, similarity)`` ordered by query then db index."""
        for t in range(self.q_count):
            idx, val = self._indices[t], self._values[t]
            for i, s in zip(idx.tolist(), val.tolist()):
                yield i, t, s

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return flat ``(db_idx, query_idx, values)`` arrays of all entries."""
        counts = [i.size for i in self._indices]
        if sum(counts) == 0:
            return _EMPTY_IDX, _EMPTY_IDX, _EMPTY_VAL
        rows = np.concatenate(self._indices)
        cols = np.repeat(np.arange(self.q_count, dtype=np.int64), counts)
        vals = np.concatenate(self._values)
        return rows, cols, vals

    def to_dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full((self.db_count, self.q_count), fill, dtype=np.float64)
        rows, cols, vals = self.coo()
        out[rows, cols] = vals
        return out

    def equals(self, other: SparseSimilarityMatrix) -> bool:
        """Exact equality of shape, evaluated pairs, and bit patterns of values."""
        if (self.db_count, self.q_count) != (other.db_count, other.q_count):
            return False
        for t in range(self.q_count):
            a_idx, a_val = self.column(t)
            b_idx, b_val = other.column(t)
            if not np.array_equal(a_idx, b_idx):
                return False
            if a_val.tobytes() != b_val.tobytes():
                return False
        return True
