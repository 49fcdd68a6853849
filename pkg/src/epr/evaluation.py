"""Precision-recall evaluation of sparse similarity matrices.

Conventions
-----------
* A retrieved pair is a true positive if it is in the soft (allowed)
  ground truth; recall only counts hard (required) pairs.
* Pairs that were never evaluated can never be retrieved, so a sparse
  matcher that misses loop revisits loses recall in multi-matching.
* The threshold sweeps the distinct similarity values in descending order;
  equal values enter together.
* AUC is the trapezoid over the operating points, anchored at
  ``(0, precision of the first point)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .io import GroundTruth
from .matrix import SparseSimilarityMatrix

TRADEOFF_COLUMNS = ("method", "mode", "auc", "density_pct", "rel_auc_vs_full")
REPORT_COLUMNS = TRADEOFF_COLUMNS + ("gt_min_pct", "gt_max_pct")


@dataclass(frozen=True)
class PrCurve:
    points: tuple[tuple[float, float], ...]  # (recall, precision), threshold descending
    thresholds: tuple[float, ...]
    auc: float


@dataclass(frozen=True)
class EvalReport:
    mode: str
    auc: float
    evaluated_pair_percentage: float
    gt_min_percentage: float
    gt_max_percentage: float
    method: str = "epr"


@dataclass(frozen=True)
class TradeoffRow:
    method: str
    mode: str
    auc: float
    density_pct: float
    rel_auc_vs_full: float


def trapezoid_auc(points) -> float:
    if not points:
        return 0.0
    r_prev, p_prev = 0.0, points[0][1]
    area = 0.0
    for r, p in points:
        area += (r - r_prev) * (p + p_prev) / 2.0
        r_prev, p_prev = r, p
    return min(1.0, max(0.0, area))


def _sweep(values: np.ndarray, is_tp: np.ndarray, is_recall_hit: np.ndarray, n_relevant: int) -> PrCurve:
    """Operating points for every distinct threshold, best value first."""
    if values.size == 0:
        return PrCurve((), (), 0.0)
    order = np.argsort(-values, kind="stable")
    v = values[order]
    tp = np.cumsum(is_tp[order])
    hits = np.cumsum(is_recall_hit[order])
    # last position of each run of equal values
    ends = np.flatnonzero(np.append(v[1:] != v[:-1], True))
    retrieved = ends + 1
    precision = tp[ends] / retrieved
    recall = hits[ends] / n_relevant
    points = tuple(zip(recall.tolist(), precision.tolist()))
    return PrCurve(points, tuple(v[ends].tolist()), trapezoid_auc(points))


def _require_entries(S: SparseSimilarityMatrix) -> None:
    if S.nnz == 0:
        raise DomainError("similarity matrix has no evaluated columns")


def best_pairs(S: SparseSimilarityMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per non-empty query column: ``(db_index, query_index, similarity)`` of its best pair."""
    rows, cols, vals = [], [], []
    for t in range(S.q_count):
        idx, val = S.column(t)
        if idx.size == 0:
            continue
        # idx is sorted, so argmax returns the smaller index on ties
        j = int(np.argmax(val))
        rows.append(int(idx[j]))
        cols.append(t)
        vals.append(float(val[j]))
    return np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals)


def single_matching_curve(S: SparseSimilarityMatrix, gt: GroundTruth) -> PrCurve:
    """PR curve using only the best evaluated pair of every query."""
    _require_entries(S)
    hard_queries = {t for _, t in gt.hard}
    if not hard_queries:
        raise DomainError("no query has a hard match; recall is undefined")
    rows, cols, vals = best_pairs(S)
    soft = gt.keys("soft", S.q_count)
    correct = np.isin(rows * S.q_count + cols, soft)
    has_hard = np.isin(cols, np.fromiter(hard_queries, dtype=np.int64))
    return _sweep(vals, correct, correct & has_hard, len(hard_queries))


def multi_matching_curve(S: SparseSimilarityMatrix, gt: GroundTruth) -> PrCurve:
    """PR curve over every evaluated pair; unevaluated hard pairs stay false negatives."""
    _require_entries(S)
    if not gt.hard:
        raise DomainError("ground truth has no hard pairs; recall is undefined")
    rows, cols, vals = S.coo()
    keys = rows * S.q_count + cols
    in_soft = np.isin(keys, gt.keys("soft", S.q_count))
    in_hard = np.isin(keys, gt.keys("hard", S.q_count))
    return _sweep(vals, in_soft, in_hard, len(gt.hard))


def density_report(S: SparseSimilarityMatrix, gt: GroundTruth) -> dict[str, float]:
    cells = S.db_count * S.q_count
    return {
        "evaluated_pair_percentage": 100.0 * S.nnz / cells,
        "gt_min_percentage": 100.0 * len(gt.hard) / cells,
        "gt_max_percentage": 100.0 * len(gt.soft) / cells,
    }


def evaluate(S: SparseSimilarityMatrix, gt: GroundTruth, mode: str, method: str = "epr") -> EvalReport:
    if mode == "single":
        curve = single_matching_curve(S, gt)
    elif mode == "multi":
        curve = multi_matching_curve(S, gt)
    else:
        raise DomainError(f"unknown evaluation mode {mode!r}")
    dens = density_report(S, gt)
    return EvalReport(mode=mode, auc=curve.auc, method=method, **dens)


def compare_runs(reports: list[EvalReport], baseline: EvalReport) -> list[TradeoffRow]:
    """Relative AUC change against ``baseline`` and density for every report."""
    if baseline.auc == 0:
        raise DomainError("baseline AUC is zero; relative change undefined")
    return [
        TradeoffRow(
            method=r.method,
            mode=r.mode,
            auc=r.auc,
            density_pct=r.evaluated_pair_percentage,
            rel_auc_vs_full=r.auc / baseline.auc - 1.0,
        )
        for r in reports
    ]


def write_report_csv(path: str | Path, reports: list[EvalReport], baseline: EvalReport | None = None) -> None:
    """Write ``method,mode,auc,density_pct,rel_auc_vs_full,gt_min_pct,gt_max_pct`` rows.

    ``rel_auc_vs_full`` is left empty when no baseline is given.
    """
    rel = {id(r): row.rel_auc_vs_full for r, row in zip(reports, compare_runs(reports, baseline))} if baseline else {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in reports:
            rv = rel.get(id(r))
            w.writerow([
                r.method, r.mode, f"{r.auc:.6f}", f"{r.evaluated_pair_percentage:.6f}",
                "" if rv is None else f"{rv:.6f}",
                f"{r.gt_min_percentage:.6f}", f"{r.gt_max_percentage:.6f}",
            ])


def write_tradeoff_csv(path: str | Path, rows: list[TradeoffRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRADEOFF_COLUMNS)
        for r in rows:
            w.writerow([r.method, r.mode, f"{r.auc:.6f}", f"{r.density_pct:.6f}", f"{r.rel_auc_vs_full:.6f}"])


def is_monotone_recall(curve: PrCurve) -> bool:
    recalls = [r for r, _ in curve.points]
    return all(b >= a for a, b in zip(recalls, recalls[1:])) and not any(math.isnan(r) for r in recalls)
