"""Synthetic place-recognition datasets with loops, stops and exploration.

Every place owns a latent unit vector. Database and query frames are noisy,
re-normalized copies of the latent vector of the place they show; query
frames marked :data:`EXPLORE` show places that never occur in the database.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .io import DescriptorSet, GroundTruth

EXPLORE = -1


@dataclass(frozen=True)
class SyntheticSpec:
    num_places: int
    dim: int
    db_route: tuple[int, ...]
    query_route: tuple[int, ...]
    condition_noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "db_route", tuple(int(p) for p in self.db_route))
        object.__setattr__(self, "query_route", tuple(int(p) for p in self.query_route))
        if self.num_places < 1 or self.dim < 1:
            raise ValidationError("num_places and dim must be positive")
        if not self.db_route or not self.query_route:
            raise ValidationError("routes must be non-empty")
        for p in self.db_route:
            if not 0 <= p < self.num_places:
                raise ValidationError(f"database route entry {p} outside [0, {self.num_places})")
        for p in self.query_route:
            if p != EXPLORE and not 0 <= p < self.num_places:
                raise ValidationError(f"query route entry {p} outside [0, {self.num_places})")
        if not self.condition_noise_sigma >= 0:
            raise ValidationError("condition_noise_sigma must be >= 0")


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _to_storage_precision(x: np.ndarray) -> np.ndarray:
    # rows are rounded to float32 so in-memory sets equal their EPRD round trip
    return x.astype(np.float32).astype(np.float64)


def route_ground_truth(db_route: Sequence[int], query_route: Sequence[int]) -> GroundTruth:
    """Hard pairs share a place; soft pairs sit within one db frame of a hard pair."""
    db_route = np.asarray(db_route, dtype=np.int64)
    n_db = db_route.size
    positions: dict[int, np.ndarray] = {}
    for p in np.unique(db_route):
        positions[int(p)] = np.flatnonzero(db_route == p)
    hard: set[tuple[int, int]] = set()
    soft: set[tuple[int, int]] = set()
    for t, p in enumerate(query_route):
        if p == EXPLORE or p not in positions:
            continue
        for i in positions[p].tolist():
            hard.add((i, t))
            for j in (i - 1, i, i + 1):
                if 0 <= j < n_db:
                    soft.add((j, t))
    return GroundTruth(frozenset(hard), frozenset(soft))


def generate_synthetic(spec: SyntheticSpec) -> tuple[DescriptorSet, DescriptorSet, GroundTruth]:
    """Draw a database set, a query set and their ground truth from ``spec``.

    The noise term is isotropic ``N(0, sigma^2 I)`` in descriptor space, so
    its expected norm grows with ``sqrt(dim)``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    latent = _unit_rows(rng.standard_normal((spec.num_places, spec.dim)))

    db_route = np.asarray(spec.db_route, dtype=np.int64)
    q_route = np.asarray(spec.query_route, dtype=np.int64)

    db_noise = rng.standard_normal((db_route.size, spec.dim))
    q_noise = rng.standard_normal((q_route.size, spec.dim))
    explore = q_route == EXPLORE
    explore_latent = _unit_rows(rng.standard_normal((int(explore.sum()), spec.dim)))

    sigma = float(spec.condition_noise_sigma)
    db = latent[db_route] + sigma * db_noise
    q_base = np.empty((q_route.size, spec.dim))
    q_base[~explore] = latent[q_route[~explore]]
    q_base[explore] = explore_latent
    q = q_base + sigma * q_noise

    db = _to_storage_precision(_unit_rows(db))
    q = _to_storage_precision(_unit_rows(q))
    gt = route_ground_truth(spec.db_route, spec.query_route)
    return DescriptorSet(db, "database"), DescriptorSet(q, "query"), gt


def parse_route(text: str) -> list[int]:
    """Parse a comma-separated route.

    Tokens: a place index (``7``), ``X`` for an exploration frame, a
    half-open range ``a:b``, and any of those repeated with ``*n``
    (``X*100``, ``0:50*2``).

    Raises ``ValueError`` naming the offending token.
    """
    route: list[int] = []
    for raw in text.split(","):
        tok = raw.strip()
        if not tok:
            raise ValueError(f"empty route token in {text!r}")
        base, _, rep = tok.partition("*")
        try:
            times = int(rep) if rep else 1
        except ValueError:
            raise ValueError(f"bad route token {tok!r}") from None
        if times < 1:
            raise ValueError(f"bad route token {tok!r}")
        if base.upper() == "X":
            part = [EXPLORE]
        elif ":" in base:
            lo, _, hi = base.partition(":")
            try:
                part = list(range(int(lo), int(hi)))
            except ValueError:
                raise ValueError(f"bad route token {tok!r}") from None
            if not part or int(lo) < 0:
                raise ValueError(f"bad route token {tok!r}")
        else:
            try:
                part = [int(base)]
            except ValueError:
                raise ValueError(f"bad route token {tok!r}") from None
            if part[0] < 0:
                raise ValueError(f"bad route token {tok!r}")
        route.extend(part * times)
    return route
