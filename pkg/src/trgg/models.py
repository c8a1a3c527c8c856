"""Samplers for typed random geometric graphs.

Three models share one graph container:

* :func:`sample_trgg` - uniform points in ``[0, 1]^d``, i.i.d. types, and
  links between points closer than a type-dependent radius
  ``r_n(a, b) = min((lambda(a, b) / n)^(1/d), 1)``.
* :func:`sample_gnm_geometric` - uniform points, a single type, and a fixed
  number of edges chosen uniformly among all node pairs. The degree
  structure does not depend on the points; they are kept so the output is a
  complete :class:`TypedGraph`.
* :func:`sample_conditional_trgg` - the graph law conditioned on prescribed
  type counts and per-type-pair edge counts.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._rng import make_rng
from .measures import PairMeasure, TypeAlphabet, TypeMeasure

__all__ = [
    "TypedGraph",
    "ModelParams",
    "sample_positions",
    "neighbor_pairs",
    "sample_trgg",
    "sample_gnm_geometric",
    "sample_conditional_trgg",
    "sample_without_replacement",
    "unrank_pairs",
    "rank_pairs",
    "read_edgelist",
    "InfeasibleError",
]


class InfeasibleError(ValueError):
    """Requested counts cannot be realized by any graph."""


@dataclass(frozen=True, eq=False)
class TypedGraph:
    """Undirected simple graph on typed points of the unit cube.

    ``edges`` is an ``(E, 2)`` integer array of pairs ``i < j``, sorted
    lexicographically; construction canonicalizes and validates it.
    """

    positions: np.ndarray
    types: np.ndarray
    alphabet: TypeAlphabet
    edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] < 1:
            raise ValueError("positions must be an (n, d) array with d >= 1")
        n = pos.shape[0]
        if n and (pos.min() < 0.0 or pos.max() > 1.0):
            raise ValueError("positions must lie in the unit cube")
        types = np.array(self.types, dtype=np.int64).reshape(-1)
        if types.shape != (n,):
            raise ValueError("need exactly one type per node")
        if n and (types.min() < 0 or types.max() >= len(self.alphabet)):
            raise ValueError("type index outside alphabet")
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(edges):
            edges = np.sort(edges, axis=1)
            if (edges[:, 0] == edges[:, 1]).any():
                raise ValueError("self-loops are not allowed")
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside node range")
            keys = edges[:, 0] * n + edges[:, 1]
            order = np.argsort(keys, kind="stable")
            keys = keys[order]
            if (np.diff(keys) == 0).any():
                raise ValueError("duplicate edges are not allowed")
            edges = edges[order]
        for arr in (pos, types, edges):
            arr.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "types", types)
        object.__setattr__(self, "edges", edges)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.reshape(-1), minlength=self.n)

    def edge_set(self) -> set:
        return set(map(tuple, self.edges.tolist()))

    def type_labels(self) -> list:
        return [self.alphabet.symbols[t] for t in self.types]

    def __eq__(self, other):
        if not isinstance(other, TypedGraph):
            return NotImplemented
        return (self.alphabet == other.alphabet
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.types, other.types)
                and np.array_equal(self.edges, other.edges))

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "alphabet": list(self.alphabet.symbols),
            "positions": self.positions.tolist(),
            "types": self.type_labels(),
            "edges": self.edges.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "TypedGraph":
        alphabet = TypeAlphabet(tuple(d["alphabet"]))
        positions = np.array(d["positions"], dtype=float).reshape(-1, int(d["dim"]))
        types = [alphabet.index(t) for t in d["types"]]
        return cls(positions, types, alphabet, np.array(d["edges"], dtype=np.int64).reshape(-1, 2))

    @classmethod
    def from_json(cls, text: str) -> "TypedGraph":
        return cls.from_dict(json.loads(text))

    def to_edgelist(self) -> str:
        """Compact text form: a ``# n=<n> d=<d>`` header, then one ``i j`` per line."""
        lines = [f"# n={self.n} d={self.dim}"]
        lines.extend(f"{i} {j}" for i, j in self.edges.tolist())
        return "\n".join(lines) + "\n"


def read_edgelist(text: str) -> tuple:
    """Parse :meth:`TypedGraph.to_edgelist` output into ``(n, d, edges)``."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("edge list must start with a '# n=<n> d=<d>' header")
    header = dict(tok.split("=", 1) for tok in lines[0].lstrip("#").split())
    try:
        n, d = int(header["n"]), int(header["d"])
    except KeyError as exc:
        raise ValueError(f"edge list header lacks {exc.args[0]!r}") from None
    edges = np.array([[int(x) for x in ln.split()] for ln in lines[1:]], dtype=np.int64).reshape(-1, 2)
    return n, d, edges


@dataclass(frozen=True)
class ModelParams:
    """Parameters of a typed random geometric graph.

    ``lam`` is the symmetric matrix of limiting ``n * r_n(a, b)^d`` values.
    Zero entries mean the two types never link; the matrix must not vanish.
    """

    n: int
    dim: int
    type_law: Sequence[float]
    lam: Sequence
    torus: bool = False
    seed: int = 0
    alphabet: TypeAlphabet | None = None

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be >= 1")
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        nu = np.array(self.type_law, dtype=float).reshape(-1)
        if (nu < 0).any() or abs(nu.sum() - 1.0) > 1e-9:
            raise ValueError("type_law must be a probability vector")
        lam = np.array(self.lam, dtype=float)
        if lam.ndim == 0:
            lam = np.full((len(nu), len(nu)), float(lam))
        if lam.shape != (len(nu), len(nu)):
            raise ValueError("lam must be an m x m matrix matching type_law")
        if (lam < 0).any() or not np.allclose(lam, lam.T, rtol=0, atol=0):
            raise ValueError("lam must be symmetric and nonnegative")
        if not (lam > 0).any():
            raise ValueError("lam must not be identically zero")
        alphabet = self.alphabet or TypeAlphabet.of_size(len(nu))
        if len(alphabet) != len(nu):
            raise ValueError("alphabet size does not match type_law")
        nu.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "type_law", nu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alphabet", alphabet)

    def radii(self) -> np.ndarray:
        """``r_n(a, b) = min((lam / n)^(1/d), 1)``; zero where ``lam`` is zero."""
        return np.minimum((self.lam / self.n) ** (1.0 / self.dim), 1.0)


def sample_positions(n: int, d: int, rng) -> np.ndarray:
    """``n`` i.i.d. uniform points in ``[0, 1]^d``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    return make_rng(rng).random((n, d))


def _radius_matrix(radius, types: np.ndarray) -> np.ndarray:
    m = int(types.max()) + 1 if len(types) else 1
    if callable(radius):
        R = np.array([[float(radius(a, b)) for b in range(m)] for a in range(m)])
    else:
        R = np.asarray(radius, dtype=float)
        if R.ndim == 0:
            R = np.full((m, m), float(R))
    if R.shape[0] < m or R.shape[0] != R.shape[1]:
        raise ValueError("radius matrix does not cover all types")
    if not np.array_equal(R, R.T):
        raise ValueError("radius must be symmetric in the two types")
    if (R < 0).any() or not (R > 0).any():
        raise ValueError("radius must be positive")
    if (R > 1).any():
        raise ValueError("radius must lie in (0, 1]")
    return R


def _pair_distances_sq(points: np.ndarray, i: np.ndarray, j: np.ndarray, torus: bool) -> np.ndarray:
    diff = np.abs(points[i] - points[j])
    if torus:
        diff = np.minimum(diff, 1.0 - diff)
    return np.einsum("ij,ij->i", diff, diff)


def neighbor_pairs(points, radius: Callable | np.ndarray | float, types=None, torus: bool = False) -> np.ndarray:
    """All pairs ``i < j`` with ``|x_i - x_j| <= r(type_i, type_j)``.

    Points are bucketed into a uniform grid whose cells are at least as wide
    as the largest radius, so every linked pair sits in adjacent cells
    (the ``3^d`` block around each cell). With ``torus`` the distance and the
    cell adjacency wrap around. Pairs whose radius is zero are never linked.

    Returns an ``(E, 2)`` array sorted lexicographically.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n, d = points.shape
    types = np.zeros(n, dtype=np.int64) if types is None else np.asarray(types, dtype=np.int64)
    R = _radius_matrix(radius, types)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)

    side = R.max()
    # cells must be at least `side` wide; cap the cell count near 4n
    g = max(1, min(int(math.floor(1.0 / side)), int(math.floor((4 * n) ** (1.0 / d)))))
    cell = np.minimum((points * g).astype(np.int64), g - 1)
    cell_id = np.ravel_multi_index(cell.T, (g,) * d)
    order = np.argsort(cell_id, kind="stable")
    sorted_ids = cell_id[order]
    all_cells = np.arange(g ** d)
    starts = np.searchsorted(sorted_ids, all_cells, side="left")
    ends = np.searchsorted(sorted_ids, all_cells, side="right")

    found_i, found_j = [], []
    node = np.arange(n)
    for off in itertools.product((-1, 0, 1), repeat=d):
        nb = cell + np.asarray(off, dtype=np.int64)
        if torus:
            nb %= g
            src = node
        else:
            ok = ((nb >= 0) & (nb < g)).all(axis=1)
            nb, src = nb[ok], node[ok]
        nb_id = np.ravel_multi_index(nb.T, (g,) * d)
        cnt = ends[nb_id] - starts[nb_id]
        total = int(cnt.sum())
        if total == 0:
            continue
        first = np.repeat(starts[nb_id], cnt)
        within = np.arange(total) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        i = np.repeat(src, cnt)
        j = order[first + within]
        keep = i < j
        i, j = i[keep], j[keep]
        r = R[types[i], types[j]]
        hit = (_pair_distances_sq(points, i, j, torus) <= r * r) & (r > 0)
        found_i.append(i[hit])
        found_j.append(j[hit])

    if not found_i:
        return np.empty((0, 2), dtype=np.int64)
    i = np.concatenate(found_i)
    j = np.concatenate(found_j)
    # wrapped offsets coincide when g <= 2
    keys = np.unique(i * n + j)
    return np.column_stack([keys // n, keys % n]).astype(np.int64)


def sample_trgg(params: ModelParams) -> TypedGraph:
    """Draw positions, then i.i.d. types, then link by type-dependent radius."""
    rng = make_rng(params.seed)
    positions = sample_positions(params.n, params.dim, rng)
    m = len(params.type_law)
    types = rng.choice(m, size=params.n, p=params.type_law)
    edges = neighbor_pairs(positions, params.radii(), types, params.torus)
    return TypedGraph(positions, types, params.alphabet, edges)


# ---------------------------------------------------------------------------
# uniform edge selection

def sample_without_replacement(pool: int, k: int, rng) -> np.ndarray:
    """``k`` distinct integers from ``range(pool)``, uniformly, sorted.

    Below half the pool, draws in batches and rejects repeats (expected
    ``O(k)`` work, no pool enumeration). Above half, a permutation of the
    enumerated pool.
    """
    if k < 0 or k > pool:
        raise InfeasibleError(f"cannot choose {k} items from a pool of {pool}")
    rng = make_rng(rng)
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if 2 * k <= pool:
        chosen = np.unique(rng.integers(0, pool, size=k))
        while len(chosen) < k:
            extra = rng.integers(0, pool, size=k - len(chosen))
            chosen = np.unique(np.concatenate([chosen, extra]))
        return chosen.astype(np.int64)
    return np.sort(rng.permutation(pool)[:k]).astype(np.int64)


def rank_pairs(i, j) -> np.ndarray:
    """Index of the pair ``i < j`` in the order ``(0,1), (0,2), (1,2), (0,3), ...``."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return j * (j - 1) // 2 + i


def unrank_pairs(index) -> tuple:
    """Inverse of :func:`rank_pairs`."""
    L = np.asarray(index, dtype=np.int64)
    j = np.floor((1.0 + np.sqrt(1.0 + 8.0 * L)) / 2.0).astype(np.int64)
    j = np.where(j * (j - 1) // 2 > L, j - 1, j)
    j = np.where((j + 1) * j // 2 <= L, j + 1, j)
    return L - j * (j - 1) // 2, j


def sample_gnm_geometric(n: int, d: int, edge_count: int, rng) -> TypedGraph:
    """Uniform points, one type, and ``edge_count`` uniform distinct edges."""
    rng = make_rng(rng)
    pool = n * (n - 1) // 2
    if edge_count < 0 or edge_count > pool:
        raise InfeasibleError(f"edge count {edge_count} exceeds the {pool} available pairs")
    positions = sample_positions(n, d, rng)
    i, j = unrank_pairs(sample_without_replacement(pool, int(edge_count), rng))
    return TypedGraph(positions, np.zeros(n, dtype=np.int64), TypeAlphabet(("a",)),
                      np.column_stack([i, j]))


# ---------------------------------------------------------------------------
# conditional model

def pair_pool_size(n_a: int, n_b: int, same: bool) -> int:
    return n_a * (n_a - 1) // 2 if same else n_a * n_b


def check_pair_budget(type_counts: np.ndarray, edge_counts: np.ndarray) -> None:
    m = len(type_counts)
    for a in range(m):
        for b in range(a, m):
            pool = pair_pool_size(int(type_counts[a]), int(type_counts[b]), a == b)
            if edge_counts[a, b] > pool:
                raise InfeasibleError(
                    f"pair budget exceeds pool for types ({a}, {b}): "
                    f"{int(edge_counts[a, b])} > {pool}")


def _validated_budget(type_measure: TypeMeasure, pair_measure: PairMeasure) -> np.ndarray:
    if type_measure.alphabet != pair_measure.alphabet:
        raise ValueError("type and pair measures use different alphabets")
    if type_measure.n != pair_measure.n:
        raise ValueError("type and pair measures disagree on n")
    try:
        edge_counts = pair_measure.edge_counts
    except ValueError as exc:
        raise InfeasibleError(str(exc)) from None
    check_pair_budget(type_measure.counts, edge_counts)
    return edge_counts


def sample_types_exact(type_measure: TypeMeasure, rng) -> np.ndarray:
    """Uniform arrangement of the type multiset given by ``type_measure``."""
    multiset = np.repeat(np.arange(len(type_measure.alphabet)), type_measure.counts)
    return make_rng(rng).permutation(multiset)


def pair_from_pool_index(idx: np.ndarray, members_a: np.ndarray, members_b: np.ndarray, same: bool) -> np.ndarray:
    """Map pool indices to node pairs ``(i, j)`` for one unordered type pair."""
    if same:
        li, lj = unrank_pairs(idx)
        i, j = members_a[li], members_a[lj]
    else:
        nb = len(members_b)
        i, j = members_a[idx // nb], members_b[idx % nb]
    return np.column_stack([np.minimum(i, j), np.maximum(i, j)])


def sample_conditional_trgg(type_measure: TypeMeasure, pair_measure: PairMeasure, rng, dim: int = 2) -> TypedGraph:
    """Graph with exactly the prescribed type counts and per-type-pair edge counts.

    Types are a uniform permutation of the type multiset; for each unordered
    type pair the edges are a uniform subset of the eligible node pairs.
    Positions are drawn but play no role in the linking.
    """
    rng = make_rng(rng)
    edge_counts = _validated_budget(type_measure, pair_measure)
    n = type_measure.n
    positions = sample_positions(n, dim, rng)
    types = sample_types_exact(type_measure, rng)
    members = [np.flatnonzero(types == a) for a in range(len(type_measure.alphabet))]
    chunks = []
    m = len(members)
    for a in range(m):
        for b in range(a, m):
            k = int(edge_counts[a, b])
            if k == 0:
                continue
            pool = pair_pool_size(len(members[a]), len(members[b]), a == b)
            idx = sample_without_replacement(pool, k, rng)
            chunks.append(pair_from_pool_index(idx, members[a], members[b], a == b))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return TypedGraph(positions, types, type_measure.alphabet, edges)
