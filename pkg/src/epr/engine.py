"""Online sparse place-recognition engine.

Each incoming query is compared against a small candidate set built from
the previous query's best matches, their look-alikes inside the database
(loops and stops), and the next few database frames (sequence assumption).
A full comparison against the whole database (relocalization) is run for
the first query and then either every ``t_reloc`` queries or whenever no
candidate reaches the relocalization threshold.
"""

from __future__ import annotations

import enum
import logging
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np

from .autotune import P_INTRA_DB, P_RELOC, ThresholdModel, autotune
from .errors import DomainError, ValidationError
from .io import DescriptorSet
from .matrix import SparseSimilarityMatrix
from .similarity import RowKernel, intra_db_matrix, k_argmax, upper_triangle

log = logging.getLogger(__name__)

Column = tuple[np.ndarray, np.ndarray]


class Strategy(str, enum.Enum):
    PERIODIC = "periodic"
    EVENT_BASED = "event_based"
    FULL_BASELINE = "full_baseline"
    NO_SDB = "no_sdb"


@dataclass(frozen=True)
class EprConfig:
    k: int = 5
    v: int = 5
    strategy: Strategy = Strategy.PERIODIC
    t_reloc: int = 100
    p_db: float = P_INTRA_DB
    p_reloc: float = P_RELOC
    standardize_db: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k}")
        if int(self.v) != self.v or self.v < 0:
            raise ValidationError(f"v must be a nonnegative integer, got {self.v}")
        if self.uses_periodic_reloc and (int(self.t_reloc) != self.t_reloc or self.t_reloc < 1):
            raise ValidationError(f"t_reloc must be a positive integer, got {self.t_reloc}")
        for name in ("p_db", "p_reloc"):
            p = getattr(self, name)
            if not 0.0 < p < 1.0:
                raise ValidationError(f"{name} must lie in (0, 1), got {p}")

    @property
    def uses_periodic_reloc(self) -> bool:
        return self.strategy in (Strategy.PERIODIC, Strategy.NO_SDB)

    @property
    def uses_sdb(self) -> bool:
        return self.strategy is not Strategy.NO_SDB

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d


@dataclass
class EngineState:
    t: int = 0
    prev_column: Column | None = None
    theta_db: float = float("nan")
    theta_reloc: float | None = None
    reloc_events: list[int] = field(default_factory=list)
    db_model: ThresholdModel | None = None
    reloc_model: ThresholdModel | None = None


def expand_intra_db(candidates: np.ndarray, neighbors: Callable[[int], np.ndarray]) -> np.ndarray:
    """Add the database look-alikes of every candidate (single pass over the snapshot)."""
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0:
        return cand
    parts = [cand] + [neighbors(int(c)) for c in cand]
    return np.unique(np.concatenate(parts))


def expand_sequence(candidates: np.ndarray, v: int, db_count: int) -> np.ndarray:
    """Add the ``v`` following database frames of every candidate, dropping those past the end."""
    cand = np.asarray(candidates, dtype=np.int64)
    if cand.size == 0 or v == 0:
        return np.unique(cand)
    ahead = (cand[:, None] + np.arange(1, v + 1, dtype=np.int64)).ravel()
    ahead = ahead[ahead < db_count]
    return np.unique(np.concatenate([cand, ahead]))


class EprEngine:
    """Sequential state machine; feed queries strictly in order via :meth:`process`."""

    def __init__(self, db: DescriptorSet, config: EprConfig | None = None):
        self.config = config or EprConfig()
        self.db_count = db.count
        self.dim = db.dim
        self.timings: dict[str, float] = {}

        tic = time.perf_counter()
        self.kernel = RowKernel(db.data)
        self._all = np.arange(self.db_count, dtype=np.int64)
        self.timings["init"] = time.perf_counter() - tic

        tic = time.perf_counter()
        self.sdb = intra_db_matrix(db, use_standardization=self.config.standardize_db)
        db_model = autotune(self._sdb_samples(), self.config.p_db)
        self.timings["sdb"] = time.perf_counter() - tic

        self.state = EngineState(theta_db=db_model.theta, db_model=db_model)
        self._neighbor_cache: dict[int, np.ndarray] = {}
        log.debug("theta_db=%.6f (mu=%.6f sigma=%.6f)", db_model.theta, db_model.mu, db_model.sigma)

    def _sdb_samples(self) -> np.ndarray:
        if self.db_count < 2:
            # no off-diagonal pairs; the lone self-similarity is the only sample
            return self.sdb.ravel()
        return upper_triangle(self.sdb)

    def neighbors(self, c: int) -> np.ndarray:
        hit = self._neighbor_cache.get(c)
        if hit is None:
            hit = np.flatnonzero(self.sdb[c] >= self.state.theta_db)
            self._neighbor_cache[c] = hit
        return hit

    # ------------------------------------------------------------------ steps

    def process(self, q) -> Column:
        if self.state.prev_column is None:
            return self.process_first_query(q)
        return self.process_query(q)

    def _relocalize(self, q) -> Column:
        self.state.reloc_events.append(self.state.t)
        return self._all, self.kernel.compare_all(q)

    def _finish(self, column: Column) -> Column:
        self.state.prev_column = column
        self.state.t += 1
        return column

    def process_first_query(self, q) -> Column:
        if self.state.prev_column is not None:
            raise ValidationError("first query already processed")
        column = self._relocalize(q)
        model = autotune(column[1], self.config.p_reloc)
        self.state.reloc_model = model
        self.state.theta_reloc = model.theta
        return self._finish(column)

    def candidates(self, prev_column: Column) -> np.ndarray:
        """Candidate set of steps (a)-(c): best previous matches, look-alikes, successors."""
        cand = k_argmax(prev_column, self.config.k)
        if self.config.uses_sdb:
            cand = expand_intra_db(cand, self.neighbors)
        return expand_sequence(cand, self.config.v, self.db_count)

    def _scheduled_reloc(self) -> bool:
        if self.config.strategy is Strategy.FULL_BASELINE:
            return True
        if self.config.uses_periodic_reloc:
            return (self.state.t + 1) % self.config.t_reloc == 0
        return False

    def relocalize_decision(self, current_column: Column | dict) -> bool:
        """Whether the current query triggers a full comparison.

        Periodic strategies use the 1-based query number; the event-based
        strategy fires when no evaluated similarity reaches ``theta_reloc``.
        """
        if self.config.strategy is Strategy.EVENT_BASED:
            values = (
                np.fromiter(current_column.values(), dtype=np.float64)
                if isinstance(current_column, dict)
                else np.asarray(current_column[1])
            )
            return not bool(np.any(values >= self.state.theta_reloc))
        return self._scheduled_reloc()

    def process_query(self, q) -> Column:
        if self.state.prev_column is None:
            raise ValidationError("process_first_query must run before process_query")
        if self._scheduled_reloc():
            # outcome does not depend on the candidate similarities; skip computing them
            return self._finish(self._relocalize(q))

        cand = self.candidates(self.state.prev_column)
        sims = self.kernel.compare(q, cand)
        if self.relocalize_decision((cand, sims)):
            return self._finish(self._relocalize(q))

        best = k_argmax((cand, sims), self.config.k)
        if self.config.uses_sdb:
            best = expand_intra_db(best, self.neighbors)
        new = np.setdiff1d(best, cand, assume_unique=True)
        if new.size:
            new_sims = self.kernel.compare(q, new)
            idx = np.concatenate([cand, new])
            val = np.concatenate([sims, new_sims])
            order = np.argsort(idx, kind="stable")
            cand, sims = idx[order], val[order]
        return self._finish((cand, sims))


@dataclass
class RunReport:
    db_count: int
    q_count: int
    evaluated_pairs: int
    percentage: float
    reloc_events: list[int]
    theta_db: float
    theta_reloc: float
    timings: dict[str, float]

    @property
    def duration_s(self) -> float:
        return self.timings["total"]


def run(db: DescriptorSet, query: DescriptorSet, config: EprConfig | None = None):
    """Process every query in order; return the sparse matrix and a run report."""
    config = config or EprConfig()
    if db.dim != query.dim:
        raise DomainError(f"database dim {db.dim} != query dim {query.dim}")
    tic = time.perf_counter()
    engine = EprEngine(db, config)
    matrix = SparseSimilarityMatrix(db.count, query.count)

    loop_tic = time.perf_counter()
    for t in range(query.count):
        idx, val = engine.process(query.data[t])
        matrix.set_column(t, idx, val)
    loop_s = time.perf_counter() - loop_tic

    timings = dict(engine.timings)
    timings["query_loop"] = loop_s
    timings["total"] = time.perf_counter() - tic
    nnz = matrix.nnz
    report = RunReport(
        db_count=db.count,
        q_count=query.count,
        evaluated_pairs=nnz,
        percentage=100.0 * nnz / (db.count * query.count),
        reloc_events=list(engine.state.reloc_events),
        theta_db=engine.state.theta_db,
        theta_reloc=float(engine.state.theta_reloc),
        timings=timings,
    )
    return matrix, report
