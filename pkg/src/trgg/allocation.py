"""Balls-into-bins allocation coupled with the conditional graph.

For every unordered type pair ``{a, b}`` and every step ``k = 1..m_n(a, b)``
two bins are sampled, ``i`` among the type-``a`` nodes and ``j`` among the
type-``b`` nodes. Bin ``i`` receives a ball of type ``b`` and bin ``j`` a
ball of type ``a``. The graph gains the edge ``{i, j}`` unless ``i == j`` or
the edge already exists; in that case a uniformly chosen eligible non-edge
between the two types is inserted instead, and the step is a *mismatch*.

The occupancy measure (ball counts per bin) and the locality measure of the
graph then differ only at nodes touched by mismatch steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import make_rng
from .measures import (
    LocalityMeasure,
    PairMeasure,
    TypeMeasure,
    _locality_from_rows,
    empirical_locality_measure,
    neighbor_type_counts,
    tv_distance,
)
from .models import (
    TypedGraph,
    _validated_budget,
    pair_from_pool_index,
    pair_pool_size,
    sample_positions,
    sample_types_exact,
)

__all__ = [
    "AllocationOutcome",
    "PairSchedule",
    "CollisionSchedule",
    "run_allocation_coupling",
    "collision_schedule",
    "exact_collision_probabilities",
    "bennett_h",
    "bennett_tail_bound",
]


@dataclass(frozen=True, eq=False)
class AllocationOutcome:
    """One coupled run.

    ``mismatches`` and ``collision_log`` are keyed by type-index pairs
    ``(a, b)`` with ``a <= b``.
    """

    occupancy: LocalityMeasure
    graph: TypedGraph
    mismatches: dict
    collision_log: dict = field(repr=False)
    ball_counts: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def total_mismatches(self) -> int:
        return sum(self.mismatches.values())

    def locality(self) -> LocalityMeasure:
        return empirical_locality_measure(self.graph)

    def tv_actual(self) -> float:
        return tv_distance(self.locality(), self.occupancy)

    def tv_bound(self) -> float:
        """``(2/n) * sum B(a, b)``."""
        return 2.0 * self.total_mismatches / self.n

    def displaced_nodes(self) -> int:
        """Nodes whose ball counts differ from their neighbor counts.

        Each such node moves ``1/n`` of mass between cells, so the total
        variation distance never exceeds ``displaced_nodes() / n``.
        """
        diff = neighbor_type_counts(self.graph) != self.ball_counts
        return int(diff.any(axis=1).sum())


def _residual_pair(pool: int, used: int, members_a, members_b, same: bool, edge_keys: set, n: int, rng):
    """Uniform eligible pair that is not yet an edge."""
    if 2 * used <= pool:
        while True:
            idx = np.array([rng.integers(pool)])
            i, j = pair_from_pool_index(idx, members_a, members_b, same)[0]
            if i * n + j not in edge_keys:
                return int(i), int(j)
    every = pair_from_pool_index(np.arange(pool), members_a, members_b, same)
    keys = every[:, 0] * n + every[:, 1]
    free = every[~np.isin(keys, np.fromiter(edge_keys, dtype=np.int64, count=len(edge_keys)))]
    i, j = free[rng.integers(len(free))]
    return int(i), int(j)


def run_allocation_coupling(type_measure: TypeMeasure, pair_measure: PairMeasure, rng, dim: int = 2) -> AllocationOutcome:
    """Run the allocation and build the coupled conditional graph.

    Positions and types consume the stream in the same order as
    :func:`trgg.models.sample_conditional_trgg`.
    """
    rng = make_rng(rng)
    edge_counts = _validated_budget(type_measure, pair_measure)
    n = type_measure.n
    m = len(type_measure.alphabet)
    positions = sample_positions(n, dim, rng)
    types = sample_types_exact(type_measure, rng)
    members = [np.flatnonzero(types == a) for a in range(m)]

    balls = np.zeros((n, m), dtype=np.int64)
    edge_keys: set = set()
    edges = []
    mismatches = {}
    log = {}
    for a in range(m):
        for b in range(a, m):
            k = int(edge_counts[a, b])
            mismatches[(a, b)] = 0
            log[(a, b)] = np.zeros(k, dtype=bool)
            if k == 0:
                continue
            same = a == b
            wa, wb = members[a], members[b]
            pool = pair_pool_size(len(wa), len(wb), same)
            si = wa[rng.integers(len(wa), size=k)]
            sj = wb[rng.integers(len(wb), size=k)]
            # balls are dropped on every step, collision or not
            np.add.at(balls, (si, b), 1)
            np.add.at(balls, (sj, a), 1)
            for step, (i, j) in enumerate(zip(si.tolist(), sj.tolist())):
                lo, hi = min(i, j), max(i, j)
                if i != j and lo * n + hi not in edge_keys:
                    edge_keys.add(lo * n + hi)
                    edges.append((lo, hi))
                    continue
                log[(a, b)][step] = True
                ri, rj = _residual_pair(pool, step, wa, wb, same, edge_keys, n, rng)
                edge_keys.add(ri * n + rj)
                edges.append((ri, rj))
                if (ri, rj) != (lo, hi):
                    mismatches[(a, b)] += 1

    graph = TypedGraph(positions, types, type_measure.alphabet,
                       np.array(edges, dtype=np.int64).reshape(-1, 2))
    occupancy = _locality_from_rows(type_measure.alphabet, types, balls, graphical=False)
    balls.setflags(write=False)
    return AllocationOutcome(occupancy, graph, mismatches, log, balls)


# ---------------------------------------------------------------------------
# collision probabilities and concentration

@dataclass(frozen=True)
class PairSchedule:
    m: int
    p: np.ndarray
    same_type: bool

    @property
    def expected(self) -> float:
        return float(self.p.sum())

    @property
    def sigma2(self) -> float:
        """``(1/m) * sum_k p_k (1 - p_k)``."""
        return float(np.sum(self.p * (1.0 - self.p)) / self.m)

    @property
    def variance(self) -> float:
        return self.m * self.sigma2


@dataclass(frozen=True)
class CollisionSchedule:
    """Per-pair step collision probabilities, keyed by ``(a, b)`` with ``a <= b``."""

    pairs: dict

    def __getitem__(self, key) -> PairSchedule:
        a, b = key
        return self.pairs[(min(a, b), max(a, b))]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def bennett_bounds(self, threshold: float) -> dict:
        return {k: bennett_tail_bound(s, threshold) for k, s in self.pairs.items()}


def _display_probabilities(m: int, same: bool) -> np.ndarray:
    k = np.arange(1, m + 1, dtype=float)
    self_term = (1.0 / m) if same else 0.0
    return self_term + (1.0 - self_term) * (k - 1.0) / (m * m)


def collision_schedule(type_measure: TypeMeasure, pair_measure: PairMeasure) -> CollisionSchedule:
    """Step probabilities ``p_k = 1{a=b}/m + (1 - 1{a=b}/m) (k - 1) / m^2``.

    Pairs with ``m_n(a, b) = 0`` are left out.
    """
    edge_counts = _validated_budget(type_measure, pair_measure)
    m = len(type_measure.alphabet)
    pairs = {}
    for a in range(m):
        for b in range(a, m):
            k = int(edge_counts[a, b])
            if k:
                pairs[(a, b)] = PairSchedule(k, _display_probabilities(k, a == b), a == b)
    return CollisionSchedule(pairs)


def exact_collision_probabilities(n_a: int, n_b: int, m: int, same: bool) -> np.ndarray:
    """Collision probability of each step under the actual sampling mechanics.

    Step ``k`` starts with exactly ``k - 1`` edges of the pair present, so
    for distinct types ``p_k = (k - 1) / (n_a n_b)``; for one type
    ``p_k = 1/n_a + (1 - 1/n_a) (k - 1) / C(n_a, 2)``.
    """
    k = np.arange(1, m + 1, dtype=float)
    if not same:
        return (k - 1.0) / (n_a * n_b)
    pool = n_a * (n_a - 1) / 2
    hit_self = 1.0 / n_a
    return hit_self + (1.0 - hit_self) * (k - 1.0) / pool


def bennett_h(t):
    """``h(t) = (1 + t) log(1 + t) - t`` for ``t >= 0``."""
    arr = np.asarray(t, dtype=float)
    if (arr < 0).any():
        raise ValueError("bennett_h is defined for t >= 0")
    out = (1.0 + arr) * np.log1p(arr) - arr
    return float(out) if out.ndim == 0 else out


def bennett_tail_bound(schedule: PairSchedule, threshold: float) -> float:
    """Upper bound on ``P(B - E B >= threshold)`` for one type pair.

    ``exp(-v h(threshold / v))`` with ``v = m * sigma^2``. A deterministic
    sum (``v == 0``) gives 1 when ``threshold <= E B`` and 0 otherwise.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    v = schedule.variance
    if v == 0.0:
        return 1.0 if threshold <= schedule.expected else 0.0
    return math.exp(-v * bennett_h(threshold / v))
