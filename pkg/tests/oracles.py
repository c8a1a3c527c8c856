"""Independent reference implementations used by the tests.

Everything here is deliberately naive: dense O(n^2) scans, explicit
factorials, full enumeration. None of it imports the code under test.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_neighbor_pairs(points, radius_matrix, types, torus=False) -> set:
    """Every pair ``i < j`` within the type-pair radius, by a full scan."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = len(pts)
    R = np.asarray(radius_matrix, dtype=float)
    types = np.asarray(types)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    if torus:
        diff = np.minimum(diff, 1.0 - diff)
    d2 = (diff ** 2).sum(axis=2)
    r = R[types[:, None], types[None, :]]
    hit = (d2 <= r * r) & (r > 0)
    i, j = np.nonzero(np.triu(hit, k=1))
    return set(zip(i.tolist(), j.tolist()))


def dense_locality(n, types, edges, m) -> dict:
    """Locality counts from a dense adjacency matrix."""
    A = np.zeros((n, n), dtype=np.int64)
    for i, j in edges:
        A[i, j] = A[j, i] = 1
    onehot = np.eye(m, dtype=np.int64)[np.asarray(types)]
    sigma = A @ onehot
    out: dict = {}
    for a, row in zip(types, sigma):
        key = (int(a), tuple(int(x) for x in row))
        out[key] = out.get(key, 0) + 1
    return out


def poisson_pmf(mu, k) -> float:
    return mu ** k * math.exp(-mu) / math.factorial(k)


def kl(p: dict, q: dict) -> float:
    total = 0.0
    for key, pk in p.items():
        if pk == 0:
            continue
        if q.get(key, 0.0) == 0:
            return math.inf
        total += pk * (math.log(pk) - math.log(q[key]))
    return total


def isolated_tail_by_enumeration(n, m, k) -> Fraction:
    """``P(#isolated >= k)`` in G(n, m), enumerating every edge set."""
    pairs = list(itertools.combinations(range(n), 2))
    hits = total = 0
    for chosen in itertools.combinations(pairs, m):
        deg = [0] * n
        for i, j in chosen:
            deg[i] += 1
            deg[j] += 1
        total += 1
        hits += sum(1 for v in deg if v == 0) >= k
    return Fraction(hits, total)


def bisect_root(f, lo, hi, tol=1e-13) -> float:
    """Root of a monotone ``f`` on ``[lo, hi]`` with a sign change."""
    flo = f(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)
