"""Rate functions for the locality, degree and detached-node deviations.

Three functionals are evaluated numerically:

* :func:`rate_J` - relative entropy of a locality measure with respect to
  the product-Poisson kernel built from its type marginal and a pair
  measure, finite only when the locality measure is consistent with both.
* :func:`rate_eta` - relative entropy of a degree law with respect to the
  Poisson law of the same mean, finite only at mean ``rho(d) t``.
* :func:`rate_xi` - the detached-node rate, i.e. the minimum of
  ``rate_eta`` over degree laws with ``delta(0) = y``. The minimizer is a
  zero-truncated Poisson law rescaled to mass ``1 - y``, whose parameter
  ``alpha`` solves ``(1 - exp(-alpha)) / alpha = (1 - y) / mu``.

:func:`xi_numerical_oracle` recomputes the detached-node rate by a
different route (dual one-dimensional maximization on a truncated support)
and is the cross-check for :func:`rate_xi`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp, pdtrc

from .measures import DegreeDistribution, LocalityMeasure, PairMeasure, TypeMeasure

__all__ = [
    "RateEvaluation",
    "PoissonProfile",
    "InfeasibleConstraints",
    "unit_ball_volume",
    "poisson_pmf",
    "log_poisson_pmf",
    "poisson_cap",
    "build_q_poi",
    "relative_entropy",
    "rate_J",
    "rate_eta",
    "solve_alpha",
    "rate_xi",
    "xi_numerical_oracle",
]

FEASIBILITY_TOL = 1e-9
ROOT_TOL = 1e-12
TAIL_EPS = 1e-14


class InfeasibleConstraints(ValueError):
    """No distribution satisfies the requested constraints."""


@dataclass(frozen=True)
class RateEvaluation:
    value: float
    feasible: bool
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        value = float(self.value)
        if math.isnan(value):
            raise ValueError("rate value is NaN")
        if -1e-12 < value < 0.0:
            value = 0.0
        if value < 0:
            raise ValueError(f"rate value must be nonnegative, got {value}")
        if math.isinf(value) == self.feasible:
            raise ValueError("value must be infinite exactly when infeasible")
        object.__setattr__(self, "value", value)

    @classmethod
    def infeasible(cls, reason: str, **diag) -> "RateEvaluation":
        return cls(math.inf, False, {"reason": reason, **diag})

    def to_dict(self) -> dict:
        return {"value": self.value, "feasible": self.feasible, "diagnostics": self.diagnostics}


def unit_ball_volume(d: int) -> float:
    """Volume ``pi^(d/2) / Gamma(d/2 + 1)`` of the unit ball in ``R^d``."""
    if int(d) != d or d < 1:
        raise ValueError("dimension must be an integer >= 1")
    return math.pi ** (d / 2) / math.gamma((d + 2) / 2)


def log_poisson_pmf(mu: float, k):
    """Log Poisson probabilities; ``mu == 0`` is the point mass at 0."""
    k = np.asarray(k, dtype=float)
    if mu < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mu == 0:
        return np.where(k == 0, 0.0, -np.inf)
    return -mu + k * math.log(mu) - gammaln(k + 1.0)


def poisson_pmf(mu: float, k):
    if mu <= 0:
        raise ValueError("Poisson mean must be positive")
    if np.any(np.asarray(k) < 0):
        raise ValueError("k must be a nonnegative integer")
    out = np.exp(log_poisson_pmf(mu, k))
    return float(out) if np.ndim(out) == 0 else out


def poisson_cap(mu: float, eps: float) -> int:
    """Smallest ``K`` with ``P(Poisson(mu) > K) < eps``."""
    if mu == 0:
        return 0
    K = max(0, int(mu))
    step = max(1, int(math.sqrt(mu)))
    while pdtrc(K, mu) >= eps:
        K += step
    while K > 0 and pdtrc(K - 1, mu) < eps:
        K -= 1
    return K


# ---------------------------------------------------------------------------
# product-Poisson kernel

@dataclass(frozen=True, eq=False)
class PoissonProfile:
    """Kernel ``Q(a, sigma) = l1(a) prod_b Poisson(sigma(b); omega(a, b) / l1(a))``.

    ``caps[a, b]`` truncates coordinate ``b`` for type ``a`` so that the box
    misses less than ``eps_tail`` of the type-``a`` mass.
    """

    type_law: np.ndarray
    omega: np.ndarray
    means: np.ndarray
    caps: np.ndarray
    eps_tail: float

    @property
    def m(self) -> int:
        return len(self.type_law)

    def log_pmf(self, a: int, sigma) -> float:
        if self.type_law[a] == 0:
            return -math.inf
        sigma = np.asarray(sigma, dtype=float)
        terms = [float(log_poisson_pmf(self.means[a, b], sigma[b])) for b in range(self.m)]
        return math.log(self.type_law[a]) + sum(terms)

    def pmf(self, a: int, sigma) -> float:
        return math.exp(self.log_pmf(a, sigma))

    def cells(self, a: int):
        """Neighbor vectors in the truncated box of type ``a``."""
        return itertools.product(*(range(int(c) + 1) for c in self.caps[a]))

    def truncated_mass(self, a: int) -> float:
        mass = float(self.type_law[a])
        for b in range(self.m):
            mu = self.means[a, b]
            if mu > 0:
                mass *= 1.0 - pdtrc(int(self.caps[a, b]), mu)
        return mass

    def as_distribution(self) -> dict:
        """Truncated kernel as a sparse ``{(a, sigma): prob}`` mapping."""
        out = {}
        for a in range(self.m):
            if self.type_law[a] == 0:
                continue
            for sigma in self.cells(a):
                out[(a, sigma)] = self.pmf(a, sigma)
        return out


def build_q_poi(type_law, omega, eps_tail: float = 1e-12) -> PoissonProfile:
    l1 = np.array(type_law, dtype=float).reshape(-1)
    if (l1 < 0).any() or abs(l1.sum() - 1.0) > FEASIBILITY_TOL:
        raise ValueError("type law must be a probability vector")
    w = np.array(omega.omega if isinstance(omega, PairMeasure) else omega, dtype=float)
    m = len(l1)
    if w.shape != (m, m) or (w < 0).any():
        raise ValueError("omega must be a nonnegative m x m matrix")
    means = np.zeros((m, m))
    for a in range(m):
        if w[a].any():
            if l1[a] == 0:
                raise ValueError("division by zero type mass")
            means[a] = w[a] / l1[a]
    per_coord = eps_tail / m
    caps = np.array([[poisson_cap(means[a, b], per_coord) for b in range(m)] for a in range(m)], dtype=np.int64)
    for arr in (l1, w, means, caps):
        arr.setflags(write=False)
    return PoissonProfile(l1, w, means, caps, eps_tail)


# ---------------------------------------------------------------------------
# relative entropy

def _as_sparse(dist) -> dict:
    if isinstance(dist, Mapping):
        return dict(dist)
    arr = np.asarray(dist, dtype=float).reshape(-1)
    return {i: float(v) for i, v in enumerate(arr)}


def _check_normalized(p: dict, tol: float = 1e-12) -> None:
    values = np.fromiter(p.values(), dtype=float, count=len(p))
    if (values < 0).any():
        raise ValueError("distribution has negative mass")
    if abs(math.fsum(values) - 1.0) > tol:
        raise ValueError(f"distribution is not normalized (total {math.fsum(values)!r})")


def _entropy_against(p: dict, log_q) -> float:
    total = []
    for key, pk in p.items():
        if pk == 0:
            continue
        lq = log_q(key)
        if lq == -math.inf:
            return math.inf
        total.append(pk * (math.log(pk) - lq))
    return math.fsum(total)


def relative_entropy(p, q) -> float:
    """``sum p log(p / q)`` with ``0 log 0 = 0``; infinite if ``p`` charges a null set of ``q``.

    Both arguments are sparse mappings (or dense vectors indexed from 0).
    Only ``p`` has to be normalized.
    """
    p = _as_sparse(p)
    q = _as_sparse(q)
    _check_normalized(p)

    def log_q(key):
        qk = q.get(key, 0.0)
        return math.log(qk) if qk > 0 else -math.inf

    return _entropy_against(p, log_q)


# ---------------------------------------------------------------------------
# locality rate

def _locality_probabilities(ell) -> tuple:
    if isinstance(ell, LocalityMeasure):
        return ell.probabilities(), len(ell.alphabet)
    probs = {(int(a), tuple(int(s) for s in sigma)): float(v) for (a, sigma), v in dict(ell).items()}
    m = len(next(iter(probs))[1]) if probs else 0
    return probs, m


def rate_J(varpi, omega, ell) -> RateEvaluation:
    """Relative entropy of ``ell`` against the product-Poisson kernel.

    Finite only when the type marginal of ``ell`` equals ``varpi`` and the
    pair marginal of ``ell`` equals ``omega`` (each entry within 1e-9).
    """
    probs, m = _locality_probabilities(ell)
    _check_normalized(probs, FEASIBILITY_TOL)
    varpi = np.asarray(varpi.probabilities if isinstance(varpi, TypeMeasure) else varpi, dtype=float)
    w = np.asarray(omega.omega if isinstance(omega, PairMeasure) else omega, dtype=float)
    if varpi.shape != (m,) or w.shape != (m, m):
        raise ValueError("alphabet size mismatch between arguments")

    l1 = np.zeros(m)
    h2 = np.zeros((m, m))
    for (a, sigma), v in probs.items():
        l1[a] += v
        h2[:, a] += v * np.asarray(sigma, dtype=float)
    marginal_gap = float(np.max(np.abs(l1 - varpi)))
    if marginal_gap > FEASIBILITY_TOL:
        return RateEvaluation.infeasible("type marginal differs from varpi", marginal_gap=marginal_gap)
    consistency_gap = float(np.max(np.abs(h2 - w)))
    if consistency_gap > FEASIBILITY_TOL:
        return RateEvaluation.infeasible("pair marginal inconsistent with omega", consistency_gap=consistency_gap)

    profile = build_q_poi(l1 / l1.sum(), w)
    value = _entropy_against(probs, lambda key: profile.log_pmf(*key))
    if math.isinf(value):
        return RateEvaluation.infeasible("locality measure charges a null cell of the kernel")
    return RateEvaluation(value, True, {"cells": len(probs), "poisson_means": profile.means.tolist()})


# ---------------------------------------------------------------------------
# degree rate

def _degree_probabilities(delta) -> dict:
    if isinstance(delta, DegreeDistribution):
        return delta.probabilities()
    return {int(k): float(v) for k, v in _as_sparse(delta).items()}


def rate_eta(delta, d: int, t: float) -> RateEvaluation:
    """``H(delta || Poisson(<delta>))`` when ``<delta> = rho(d) t``, else infinite."""
    if t <= 0:
        raise ValueError("t must be positive")
    p = _degree_probabilities(delta)
    _check_normalized(p)
    mean = math.fsum(k * v for k, v in p.items())
    target = unit_ball_volume(d) * t
    if abs(mean - target) > FEASIBILITY_TOL:
        return RateEvaluation.infeasible("mean degree differs from rho(d) t", mean=mean, target=target)
    value = _entropy_against(p, lambda k: float(log_poisson_pmf(mean, k)))
    return RateEvaluation(value, True, {"mean": mean})


# ---------------------------------------------------------------------------
# detached-node rate

def _truncated_ratio(alpha: float) -> float:
    """``(1 - exp(-alpha)) / alpha``, strictly decreasing from 1 to 0."""
    return -math.expm1(-alpha) / alpha


def solve_alpha(y: float, mu: float) -> float:
    """Unique ``alpha > 0`` with ``(1 - exp(-alpha)) / alpha = (1 - y) / mu``.

    Bisection on a bracket grown by doubling, to absolute tolerance 1e-12.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    target = (1.0 - y) / mu
    if not 0.0 < target < 1.0:
        raise ValueError(f"(1 - y) / mu = {target} is outside feasible region (0, 1)")
    lo, hi = 0.0, 1.0
    while _truncated_ratio(hi) > target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > ROOT_TOL:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _truncated_ratio(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _log_expm1(x: float) -> float:
    """``log(exp(x) - 1)`` without overflow for large ``x``."""
    return x + math.log(-math.expm1(-x))


def _detached_term(y: float, mu: float) -> float:
    """``y log(y / exp(-mu))`` with ``0 log 0 = 0``."""
    return 0.0 if y == 0 else y * (math.log(y) + mu)


def rate_xi(y: float, d: int, t: float) -> RateEvaluation:
    """Detached-node rate at proportion ``y`` for mean degree ``mu = rho(d) t``.

    Evaluated as the relative entropy of the explicit minimizer
    ``p(0) = y``, ``p(k) = (1 - y) alpha^k / (k! (e^alpha - 1))`` against
    ``Poisson(mu)``, summed until the remaining minimizer mass is below 1e-14.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError("y must lie in [0, 1]")
    if t <= 0:
        raise ValueError("t must be positive")
    mu = unit_ball_volume(d) * t
    if y == 1.0:
        return RateEvaluation.infeasible("no degree law with all nodes detached has positive mean", mu=mu)
    gap = (1.0 - y) - mu
    if gap > FEASIBILITY_TOL:
        return RateEvaluation.infeasible("mean degree too small for 1 - y non-detached nodes", mu=mu)
    if gap >= -FEASIBILITY_TOL:
        # alpha -> 0: every non-detached node has degree one
        value = _detached_term(y, mu) + (1.0 - y) * (math.log(1.0 - y) - math.log(mu) + mu)
        return RateEvaluation(value, True, {"alpha": 0.0, "mu": mu, "terms": 2, "truncation_mass": 0.0})

    alpha = solve_alpha(y, mu)
    K = max(1, poisson_cap(alpha, TAIL_EPS))
    k = np.arange(1, K + 1, dtype=float)
    log_p = math.log1p(-y) + k * math.log(alpha) - gammaln(k + 1.0) - _log_expm1(alpha)
    log_q = log_poisson_pmf(mu, k)
    p = np.exp(log_p)
    value = _detached_term(y, mu) + math.fsum(p * (log_p - log_q))
    truncation_mass = (1.0 - y) * pdtrc(K, alpha) / -math.expm1(-alpha)
    return RateEvaluation(value, True, {
        "alpha": alpha,
        "mu": mu,
        "terms": K + 1,
        "truncation_mass": float(truncation_mass),
        "minimizer_mean": float(np.dot(k, p)),
    })


def xi_numerical_oracle(y: float, mu: float, K: int | None = None) -> float:
    """Minimum of ``H(delta || Poisson(mu))`` over laws on ``{0..K}`` with
    ``delta(0) = y`` and mean ``mu``.

    Solved through the concave dual in the tilt ``beta`` of
    ``delta(k) ~ q(k) exp(beta k)`` on ``k >= 1``, maximized by a bounded
    scalar search. ``K`` defaults to a cap derived from ``mu / (1 - y)``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if not 0.0 <= y < 1.0:
        raise InfeasibleConstraints("y must lie in [0, 1)")
    rest = 1.0 - y
    if rest > mu + FEASIBILITY_TOL:
        raise InfeasibleConstraints("mean mu cannot carry 1 - y non-detached mass")
    if K is None:
        c = mu / rest
        K = int(math.ceil(c + 40.0 * math.sqrt(c) + 40.0))
    if K * rest < mu - FEASIBILITY_TOL:
        raise InfeasibleConstraints(f"support {{0..{K}}} cannot carry mean {mu} with delta(0) = {y}")

    k = np.arange(1, K + 1, dtype=float)
    log_q = log_poisson_pmf(mu, k)
    base = 0.0 if y == 0 else y * (math.log(y) + mu)
    if abs(rest - mu) <= FEASIBILITY_TOL:
        return base + rest * (math.log(rest) - float(log_q[0]))
    if abs(K * rest - mu) <= FEASIBILITY_TOL:
        return base + rest * (math.log(rest) - float(log_q[-1]))

    def tilted_mean(beta):
        w = log_q + beta * k
        w = np.exp(w - w.max())
        return float(np.dot(k, w) / w.sum())

    def neg_dual(beta):
        return -(beta * mu - rest * float(logsumexp(log_q + beta * k)))

    lo, hi = -1.0, 1.0
    while rest * tilted_mean(lo) > mu:
        lo *= 2.0
    while rest * tilted_mean(hi) < mu:
        hi *= 2.0
    res = minimize_scalar(neg_dual, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12, "maxiter": 500})
    return base + rest * math.log(rest) - float(res.fun)
