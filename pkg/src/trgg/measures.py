"""Empirical measures of a typed graph, stored as exact integer counts.

Every measure keeps its integer counts together with the node count ``n``;
probabilities are derived views. Keeping counts exact means the
consistency relation between a locality measure and a pair measure can be
checked with zero tolerance.

Conventions
-----------
* Types are addressed by their index ``0..m-1`` in a :class:`TypeAlphabet`.
* A neighbor vector ``sigma`` is a length-``m`` tuple of nonnegative ints,
  ``sigma[b]`` being the number of type-``b`` neighbors of a node.
* The pair measure is held as the matrix of *directed* endpoint counts
  ``n * omega(a, b)``; the diagonal therefore counts every same-type edge
  twice.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .models import TypedGraph

__all__ = [
    "TypeAlphabet",
    "TypeMeasure",
    "PairMeasure",
    "LocalityMeasure",
    "DegreeDistribution",
    "empirical_type_measure",
    "empirical_pair_measure",
    "empirical_locality_measure",
    "degree_distribution",
    "locality_marginals",
    "check_consistency",
    "tv_distance",
    "neighbor_type_counts",
    "measure_from_json",
]


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _frozen_int_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=np.int64)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TypeAlphabet:
    """Ordered finite list of distinct type labels."""

    symbols: tuple

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValueError("type alphabet must be nonempty")
        if len(set(symbols)) != len(symbols):
            raise ValueError(f"type labels must be distinct: {symbols}")
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def of_size(cls, m: int) -> "TypeAlphabet":
        """Alphabet ``a, b, c, ...`` (or ``t0, t1, ...`` beyond 26 types)."""
        if m < 1:
            raise ValueError("alphabet size must be >= 1")
        if m <= 26:
            return cls(tuple(chr(ord("a") + i) for i in range(m)))
        return cls(tuple(f"t{i}" for i in range(m)))

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def index(self, symbol) -> int:
        try:
            return self.symbols.index(str(symbol))
        except ValueError:
            raise KeyError(f"unknown type symbol {symbol!r}") from None


@dataclass(frozen=True)
class TypeMeasure:
    """Counts of nodes per type; ``probabilities`` gives ``counts / n``."""

    alphabet: TypeAlphabet
    counts: np.ndarray
    n: int = field(default=-1)

    def __post_init__(self):
        counts = _frozen_int_array(self.counts)
        if counts.shape != (len(self.alphabet),):
            raise ValueError("type counts must have one entry per symbol")
        if (counts < 0).any():
            raise ValueError("type counts must be nonnegative")
        total = int(counts.sum())
        n = total if self.n == -1 else int(self.n)
        if total != n:
            raise ValueError(f"type counts sum to {total}, expected n={n}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_probabilities(cls, alphabet: TypeAlphabet, probs: Sequence[float], n: int) -> "TypeMeasure":
        """Integral measure ``n * probs``; raises unless every entry is an integer."""
        raw = np.asarray(probs, dtype=float) * n
        counts = np.rint(raw).astype(np.int64)
        if np.max(np.abs(raw - counts), initial=0.0) > 1e-9:
            raise ValueError("n * probabilities must be integral")
        return cls(alphabet, counts, n)

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n

    def fractions(self) -> tuple:
        return tuple(Fraction(int(c), self.n) for c in self.counts)

    def __eq__(self, other):
        if not isinstance(other, TypeMeasure):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.n == other.n
                and np.array_equal(self.counts, other.counts))

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "kind": "type",
            "alphabet": list(self.alphabet.symbols),
            "n": self.n,
            "counts": [int(c) for c in self.counts],
        }

    def to_json(self) -> str:
        return _dumps(self.to_dict())


@dataclass(frozen=True)
class PairMeasure:
    """Empirical pair measure held as directed endpoint counts ``n * omega``.

    For graph-derived measures the matrix is symmetric with an even diagonal,
    and :attr:`edge_counts` recovers the unordered counts ``m_n(a, b)``.
    Measures produced by :func:`locality_marginals` from arbitrary input may
    be neither; they are kept as they are.
    """

    alphabet: TypeAlphabet
    directed_counts: np.ndarray
    n: int

    def __post_init__(self):
        m = len(self.alphabet)
        counts = _frozen_int_array(self.directed_counts, (m, m))
        if (counts < 0).any():
            raise ValueError("pair counts must be nonnegative")
        if int(self.n) < 1:
            raise ValueError("pair measure needs n >= 1")
        object.__setattr__(self, "directed_counts", counts)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def from_edge_counts(cls, alphabet: TypeAlphabet, edge_counts, n: int) -> "PairMeasure":
        """Build from unordered per-type-pair edge counts (symmetric matrix)."""
        e = np.asarray(edge_counts, dtype=np.int64)
        if e.shape != (len(alphabet), len(alphabet)):
            raise ValueError("edge count matrix has the wrong shape")
        if not np.array_equal(e, e.T):
            raise ValueError("edge count matrix must be symmetric")
        return cls(alphabet, e + np.diag(np.diag(e)), n)

    @classmethod
    def from_omega(cls, alphabet: TypeAlphabet, omega, n: int) -> "PairMeasure":
        """Build from a real matrix ``omega``; ``n * omega`` must be integral."""
        raw = np.asarray(omega, dtype=float) * n
        counts = np.rint(raw).astype(np.int64)
        if np.max(np.abs(raw - counts), initial=0.0) > 1e-9:
            raise ValueError("n * omega must be integral")
        return cls(alphabet, counts, n)

    @property
    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.directed_counts, self.directed_counts.T))

    @property
    def edge_counts(self) -> np.ndarray:
        """Unordered counts ``m_n(a, b) = n omega(a, b) / (1 + 1{a=b})``."""
        d = self.directed_counts
        if not self.is_symmetric or (np.diag(d) % 2).any():
            raise ValueError("pair measure is not graph-realizable (asymmetric or odd diagonal)")
        e = d.copy()
        np.fill_diagonal(e, np.diag(d) // 2)
        return e

    @property
    def omega(self) -> np.ndarray:
        return self.directed_counts / self.n

    @property
    def total_mass(self) -> Fraction:
        """``sum omega = 2|E|/n`` for graph-derived measures."""
        return Fraction(int(self.directed_counts.sum()), self.n)

    @property
    def n_edges(self) -> int:
        return int(np.triu(self.edge_counts).sum())

    def __eq__(self, other):
        if not isinstance(other, PairMeasure):
            return NotImplemented
        return (self.alphabet == other.alphabet and self.n == other.n
                and np.array_equal(self.directed_counts, other.directed_counts))

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "kind": "pair",
            "alphabet": list(self.alphabet.symbols),
            "n": self.n,
            "directed_counts": self.directed_counts.tolist(),
        }

    def to_json(self) -> str:
        return _dumps(self.to_dict())


@dataclass(frozen=True)
class LocalityMeasure:
    """Sparse counts over cells ``(type index, neighbor vector)``.

    Graph-derived measures have neighbor counts of at most ``n - 1``; pass
    ``graphical=False`` for occupancy measures, whose bins may hold more.
    """

    alphabet: TypeAlphabet
    counts: Mapping
    n: int = -1
    graphical: bool = field(default=True, compare=False)

    def __post_init__(self):
        m = len(self.alphabet)
        clean = {}
        for (a, sigma), c in self.counts.items():
            a = int(a)
            sigma = tuple(int(s) for s in sigma)
            c = int(c)
            if not 0 <= a < m:
                raise ValueError(f"type index {a} outside alphabet")
            if len(sigma) != m:
                raise ValueError("neighbor vector length must equal alphabet size")
            if min(sigma) < 0:
                raise ValueError("neighbor counts must be nonnegative")
            if c < 0:
                raise ValueError("locality counts must be nonnegative")
            if c:
                key = (a, sigma)
                clean[key] = clean.get(key, 0) + c
        total = sum(clean.values())
        n = total if self.n == -1 else int(self.n)
        if total != n:
            raise ValueError(f"locality counts sum to {total}, expected n={n}")
        if n < 1:
            raise ValueError("locality measure needs n >= 1")
        if self.graphical and any(max(s, default=0) > n - 1 for _, s in clean):
            raise ValueError("neighbor counts cannot exceed n - 1")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))
        object.__setattr__(self, "n", n)

    def probabilities(self) -> dict:
        return {k: c / self.n for k, c in self.counts.items()}

    def cells(self):
        return self.counts.keys()

    def __eq__(self, other):
        if not isinstance(other, LocalityMeasure):
            return NotImplemented
        return self.alphabet == other.alphabet and self.n == other.n and self.counts == other.counts

    __hash__ = None

    def to_dict(self) -> dict:
        out = {
            "kind": "locality",
            "alphabet": list(self.alphabet.symbols),
            "n": self.n,
            "counts": [[self.alphabet.symbols[a], list(s), c] for (a, s), c in self.counts.items()],
        }
        if not self.graphical:
            out["graphical"] = False
        return out

    def to_json(self) -> str:
        return _dumps(self.to_dict())


@dataclass(frozen=True)
class DegreeDistribution:
    """Sparse counts of nodes per degree."""

    counts: Mapping
    n: int = -1

    def __post_init__(self):
        clean = {}
        for r, c in self.counts.items():
            r, c = int(r), int(c)
            if r < 0 or c < 0:
                raise ValueError("degrees and counts must be nonnegative")
            if c:
                clean[r] = clean.get(r, 0) + c
        total = sum(clean.values())
        n = total if self.n == -1 else int(self.n)
        if total != n:
            raise ValueError(f"degree counts sum to {total}, expected n={n}")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))
        object.__setattr__(self, "n", n)

    def probabilities(self) -> dict:
        return {r: c / self.n for r, c in self.counts.items()}

    def __getitem__(self, r: int) -> Fraction:
        return Fraction(self.counts.get(int(r), 0), self.n)

    @property
    def mean(self) -> Fraction:
        return Fraction(sum(r * c for r, c in self.counts.items()), self.n)

    def to_dict(self) -> dict:
        return {"kind": "degree", "n": self.n, "counts": [[r, c] for r, c in self.counts.items()]}

    def to_json(self) -> str:
        return _dumps(self.to_dict())


def measure_from_json(text: str):
    """Inverse of the ``to_json`` methods above."""
    d = json.loads(text)
    kind = d.get("kind")
    if kind == "degree":
        return DegreeDistribution({r: c for r, c in d["counts"]}, d["n"])
    alphabet = TypeAlphabet(tuple(d["alphabet"]))
    if kind == "type":
        return TypeMeasure(alphabet, d["counts"], d["n"])
    if kind == "pair":
        return PairMeasure(alphabet, d["directed_counts"], d["n"])
    if kind == "locality":
        counts = {(alphabet.index(a), tuple(s)): c for a, s, c in d["counts"]}
        return LocalityMeasure(alphabet, counts, d["n"], graphical=d.get("graphical", True))
    raise ValueError(f"unknown measure kind {kind!r}")


# ---------------------------------------------------------------------------
# statistics of a graph

def _require_nonempty(graph: "TypedGraph") -> None:
    if graph.n < 1:
        raise ValueError("empty graph")


def neighbor_type_counts(graph: "TypedGraph") -> np.ndarray:
    """``(n, m)`` matrix whose row ``j`` is the neighbor vector of node ``j``."""
    m = len(graph.alphabet)
    out = np.zeros((graph.n, m), dtype=np.int64)
    if len(graph.edges):
        i, j = graph.edges[:, 0], graph.edges[:, 1]
        np.add.at(out, (i, graph.types[j]), 1)
        np.add.at(out, (j, graph.types[i]), 1)
    return out


def empirical_type_measure(graph: "TypedGraph") -> TypeMeasure:
    _require_nonempty(graph)
    counts = np.bincount(graph.types, minlength=len(graph.alphabet))
    return TypeMeasure(graph.alphabet, counts, graph.n)


def empirical_pair_measure(graph: "TypedGraph") -> PairMeasure:
    """Each edge ``{i, j}`` contributes ``1/n`` at both ``(Z_i, Z_j)`` and ``(Z_j, Z_i)``."""
    _require_nonempty(graph)
    m = len(graph.alphabet)
    directed = np.zeros((m, m), dtype=np.int64)
    if len(graph.edges):
        ti = graph.types[graph.edges[:, 0]]
        tj = graph.types[graph.edges[:, 1]]
        np.add.at(directed, (ti, tj), 1)
        np.add.at(directed, (tj, ti), 1)
    return PairMeasure(graph.alphabet, directed, graph.n)


def _locality_from_rows(alphabet: TypeAlphabet, types: np.ndarray, sigma: np.ndarray,
                        graphical: bool = True) -> LocalityMeasure:
    counts: dict = {}
    for row in np.column_stack([types, sigma]).tolist():
        key = (row[0], tuple(row[1:]))
        counts[key] = counts.get(key, 0) + 1
    return LocalityMeasure(alphabet, counts, len(types), graphical=graphical)


def empirical_locality_measure(graph: "TypedGraph") -> LocalityMeasure:
    _require_nonempty(graph)
    return _locality_from_rows(graph.alphabet, graph.types, neighbor_type_counts(graph))


def degree_distribution(ell: LocalityMeasure) -> DegreeDistribution:
    counts: dict = {}
    for (_, sigma), c in ell.counts.items():
        r = sum(sigma)
        counts[r] = counts.get(r, 0) + c
    return DegreeDistribution(counts, ell.n)


def h2_counts(ell: LocalityMeasure) -> np.ndarray:
    """Integer matrix ``H[b, a] = sum_sigma count(a, sigma) * sigma[b]``."""
    m = len(ell.alphabet)
    out = np.zeros((m, m), dtype=np.int64)
    for (a, sigma), c in ell.counts.items():
        out[:, a] += c * np.asarray(sigma, dtype=np.int64)
    return out


def locality_marginals(ell: LocalityMeasure) -> tuple:
    """Type marginal and pair marginal of a locality measure.

    The pair marginal follows ``H2(l)(b, a) = sum_sigma l(a, sigma) sigma(b)``
    and is not symmetrized.
    """
    m = len(ell.alphabet)
    type_counts = np.zeros(m, dtype=np.int64)
    for (a, _), c in ell.counts.items():
        type_counts[a] += c
    return TypeMeasure(ell.alphabet, type_counts, ell.n), PairMeasure(ell.alphabet, h2_counts(ell), ell.n)


def check_consistency(omega: PairMeasure, ell: LocalityMeasure, tol: float = 0.0) -> bool:
    """True iff ``|H2(ell)(b, a) - omega(b, a)| <= tol`` for every pair of types.

    With ``tol == 0`` the comparison is exact integer arithmetic.
    """
    if omega.alphabet != ell.alphabet:
        raise ValueError("alphabet mismatch between pair and locality measure")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    h = h2_counts(ell)
    w = omega.directed_counts
    if tol == 0:
        return bool(np.array_equal(h * omega.n, w * ell.n))
    return bool(np.max(np.abs(h / ell.n - w / omega.n)) <= tol)


def tv_distance(ell: LocalityMeasure, other: LocalityMeasure) -> float:
    """Total variation ``(1/2) sum |ell - other|`` over the union of supports."""
    if ell.alphabet != other.alphabet:
        raise ValueError("alphabet mismatch")
    n1, n2 = ell.n, other.n
    keys = set(ell.counts) | set(other.counts)
    num = sum(abs(ell.counts.get(k, 0) * n2 - other.counts.get(k, 0) * n1) for k in keys)
    return float(Fraction(num, 2 * n1 * n2))


def degree_counts_from_graph(graph: "TypedGraph") -> DegreeDistribution:
    """Degree distribution straight from the adjacency (no locality measure)."""
    deg = graph.degrees()
    values, cnt = np.unique(deg, return_counts=True)
    return DegreeDistribution(dict(zip(values.tolist(), cnt.tolist())), graph.n)

