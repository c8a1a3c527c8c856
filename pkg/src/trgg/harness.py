"""Experiment orchestration: seeded replica farms and tabular output.

Each replica draws from a stream derived from ``(seed, n, replica)``, so the
tables depend only on the configuration and never on the number of worker
processes. Results are gathered into a buffer indexed by replica before any
statistic is computed.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import replica_rng
from .allocation import bennett_tail_bound, collision_schedule, run_allocation_coupling
from .measures import PairMeasure, TypeAlphabet, TypeMeasure
from .models import check_pair_budget, pair_pool_size, sample_gnm_geometric
from .rates import (
    InfeasibleConstraints,
    log_poisson_pmf,
    poisson_cap,
    rate_xi,
    relative_entropy,
    unit_ball_volume,
    xi_numerical_oracle,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ResultTable",
    "run_experiment",
    "run_mc_isolated",
    "run_mc_degree",
    "run_coupling_experiment",
    "run_rates_sweep",
    "emit_results",
    "write_results",
    "plot_series",
    "exact_isolated_tail",
    "integral_measures",
]

KINDS = ("mc-isolated", "mc-degree", "coupling", "rates-sweep")
EXACT_TAIL_MAX_N = 400


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: tuple = (100,)
    d: int = 2
    t: float | None = None
    mu: float | None = None
    lambda_n: tuple | None = None
    type_law: tuple = (1.0,)
    lam: tuple | None = None
    torus: bool = False
    replicas: int = 100
    seed: int = 0
    y: float | None = None
    y_grid: tuple | None = None
    threshold: float = 5.0
    threads: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        n = self.n if isinstance(self.n, (list, tuple)) else (self.n,)
        try:
            n = tuple(int(v) for v in n)
        except (TypeError, ValueError):
            raise ConfigError("n", "must be an integer or a list of integers") from None
        if not n or min(n) < 2:
            raise ConfigError("n", "node counts must be >= 2")
        object.__setattr__(self, "n", n)
        if int(self.d) < 1:
            raise ConfigError("d", "dimension must be >= 1")
        if int(self.replicas) < 1:
            raise ConfigError("replicas", "need at least one replica")
        if int(self.threads) < 1:
            raise ConfigError("threads", "need at least one worker")
        if self.t is not None and self.mu is not None:
            raise ConfigError("mu", "give either t or mu, not both")
        if self.mu is not None:
            if float(self.mu) <= 0:
                raise ConfigError("mu", "must be positive")
            object.__setattr__(self, "t", float(self.mu) / unit_ball_volume(int(self.d)))
            object.__setattr__(self, "mu", None)
        if self.t is not None and float(self.t) <= 0:
            raise ConfigError("t", "must be positive")
        if self.lambda_n is not None:
            lam_n = tuple(int(v) for v in self.lambda_n)
            if len(lam_n) != len(n):
                raise ConfigError("lambda_n", "needs one edge count per entry of n")
            for nv, lv in zip(n, lam_n):
                if not 0 <= lv <= nv * (nv - 1) // 2:
                    raise ConfigError("lambda_n", f"edge count {lv} impossible for n={nv}")
            object.__setattr__(self, "lambda_n", lam_n)
        nu = tuple(float(v) for v in self.type_law)
        if not nu or min(nu) < 0 or abs(sum(nu) - 1.0) > 1e-9:
            raise ConfigError("type_law", "must be a probability vector")
        object.__setattr__(self, "type_law", nu)
        if self.lam is not None:
            lam = np.asarray(self.lam, dtype=float)
            if lam.ndim == 0:
                lam = np.full((len(nu), len(nu)), float(lam))
            if lam.shape != (len(nu), len(nu)) or (lam < 0).any() or not np.array_equal(lam, lam.T):
                raise ConfigError("lam", "must be a symmetric nonnegative matrix matching type_law")
            object.__setattr__(self, "lam", tuple(tuple(float(x) for x in row) for row in lam))
        if self.y is not None and not 0.0 <= float(self.y) <= 1.0:
            raise ConfigError("y", "must lie in [0, 1]")
        if self.y_grid is not None:
            grid = tuple(float(v) for v in self.y_grid)
            if any(not 0.0 <= v <= 1.0 for v in grid):
                raise ConfigError("y_grid", "values must lie in [0, 1]")
            object.__setattr__(self, "y_grid", grid)
        if float(self.threshold) <= 0:
            raise ConfigError("threshold", "must be positive")
        self._check_kind()

    def _check_kind(self):
        if self.kind == "mc-isolated":
            if self.y is None:
                raise ConfigError("y", "mc-isolated needs a target proportion y")
            if self.t is None:
                raise ConfigError("t", "mc-isolated needs t (or mu)")
        elif self.kind == "mc-degree":
            if self.t is None and self.lambda_n is None:
                raise ConfigError("t", "mc-degree needs t, mu or lambda_n")
        elif self.kind == "coupling":
            if self.lam is None:
                raise ConfigError("lam", "coupling needs the lam matrix")
        elif self.kind == "rates-sweep":
            if self.t is None:
                raise ConfigError("t", "rates-sweep needs t (or mu)")
            if self.y_grid is None and self.y is None:
                raise ConfigError("y_grid", "rates-sweep needs y_grid or y")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        if "kind" not in data:
            raise ConfigError("kind", "missing")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **changes) -> "ExperimentConfig":
        data = {k: v for k, v in asdict(self).items()}
        data.update({k: v for k, v in changes.items() if v is not None})
        return type(self)(**data)

    def echo(self) -> dict:
        """Everything that determines the table (worker count and output path excluded)."""
        data = asdict(self)
        data.pop("threads")
        data.pop("output")
        data.pop("mu")
        return json.loads(json.dumps(data))

    def edge_budget(self, n: int, index: int) -> int:
        """``lambda_n``: explicit, or round-half-even of ``n rho(d) t / 2``."""
        if self.lambda_n is not None:
            return self.lambda_n[index]
        return int(round(n * unit_ball_volume(self.d) * self.t / 2.0))


@dataclass(frozen=True)
class ResultTable:
    columns: tuple
    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        rows = [tuple(r) for r in self.rows]
        for r in rows:
            if len(r) != len(self.columns):
                raise ValueError("table rows must match the column count")
        object.__setattr__(self, "rows", rows)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list:
        return [dict(zip(self.columns, r)) for r in self.rows]

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        d = json.loads(text)
        return cls(tuple(d["columns"]), [tuple(r) for r in d["rows"]], d["metadata"])


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def emit_results(table: ResultTable, fmt: str = "csv") -> bytes:
    """Serialize ``table`` deterministically as CSV or JSON."""
    if fmt == "json":
        payload = {"metadata": table.metadata, "columns": list(table.columns), "rows": [list(r) for r in table.rows]}
        return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown output format {fmt!r}")
    buf = io.StringIO()
    for key in sorted(table.metadata):
        buf.write(f"# {key}={json.dumps(table.metadata[key], sort_keys=True, separators=(',', ':'))}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue().encode()


def write_results(table: ResultTable, path, fmt: str = "csv") -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(emit_results(table, fmt))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc.strerror}") from exc
    return path


def _metadata(config: ExperimentConfig, **extra) -> dict:
    meta = {"artifact_version": __version__, "config": config.echo(), "kind": config.kind, "seed": config.seed}
    meta.update(extra)
    return meta


def _farm(worker, jobs: list, threads: int) -> list:
    """Evaluate ``worker(*job)`` for each job, in job order."""
    if threads <= 1 or len(jobs) <= 1:
        return [worker(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, *zip(*jobs)))


def _chunks(replicas: int, threads: int) -> list:
    size = max(1, math.ceil(replicas / (4 * threads)))
    return [(start, min(replicas, start + size)) for start in range(0, replicas, size)]


# ---------------------------------------------------------------------------
# detached nodes

def _isolated_counts(n: int, d: int, edges: int, seed: int, start: int, stop: int) -> np.ndarray:
    out = np.empty(stop - start, dtype=np.int64)
    for idx, r in enumerate(range(start, stop)):
        g = sample_gnm_geometric(n, d, edges, replica_rng(seed, r, n))
        out[idx] = int(np.count_nonzero(g.degrees() == 0))
    return out


def _count_graphs_without_isolated(n: int, m: int) -> int:
    return sum((-1) ** j * comb(n, j) * comb(comb(n - j, 2), m) for j in range(n + 1))


def exact_isolated_tail(n: int, m: int, k: int) -> Fraction:
    """Exact ``P(#isolated nodes >= k)`` in a uniform graph with ``n`` nodes and ``m`` edges.

    Counts graphs by inclusion-exclusion over the set of isolated nodes.
    """
    total = comb(comb(n, 2), m)
    hits = sum(comb(n, i) * _count_graphs_without_isolated(n - i, m) for i in range(max(k, 0), n + 1))
    return Fraction(hits, total)


def _log_fraction(f: Fraction) -> float:
    return math.log(f.numerator) - math.log(f.denominator) if f > 0 else -math.inf


def run_mc_isolated(config: ExperimentConfig) -> ResultTable:
    """Empirical upper-tail probability of the detached proportion in G(n, lambda_n).

    Per ``n``: ``p_hat = P(D(0) >= y)`` over the replicas and the empirical
    rate ``-log(p_hat) / n``. Cells without hits are censored and report the
    resolution bound ``log(R) / n``. For small ``n`` the exact tail is added.
    """
    if config.kind != "mc-isolated":
        raise ConfigError("kind", "expected mc-isolated")
    y, R = float(config.y), int(config.replicas)
    xi = rate_xi(y, config.d, config.t).value
    rows = []
    for index, n in enumerate(config.n):
        edges = config.edge_budget(n, index)
        jobs = [(n, config.d, edges, config.seed, a, b) for a, b in _chunks(R, config.threads)]
        counts = np.concatenate(_farm(_isolated_counts, jobs, config.threads))
        need = math.ceil(y * n - 1e-9)
        hits = int(np.count_nonzero(counts >= need))
        p_hat = hits / R
        censored = hits == 0
        rate_hat = math.log(R) / n if censored else -math.log(p_hat) / n
        p_exact = rate_exact = None
        if n <= EXACT_TAIL_MAX_N:
            exact = exact_isolated_tail(n, edges, need)
            p_exact = float(exact)
            rate_exact = -_log_fraction(exact) / n
        rows.append((n, edges, R, need, hits, p_hat, rate_hat, censored, xi,
                     abs(rate_hat - xi) if math.isfinite(xi) else None,
                     float(counts.mean()) / n, p_exact, rate_exact))
    columns = ("n", "lambda_n", "replicas", "threshold_count", "hits", "p_hat", "rate_hat",
               "censored", "xi", "gap", "mean_detached", "p_exact", "rate_exact")
    return ResultTable(columns, rows, _metadata(config, mu=unit_ball_volume(config.d) * config.t))


# ---------------------------------------------------------------------------
# degree law

def _degree_histograms(n: int, d: int, edges: int, seed: int, start: int, stop: int) -> list:
    return [np.bincount(sample_gnm_geometric(n, d, edges, replica_rng(seed, r, n)).degrees())
            for r in range(start, stop)]


def _reference_law(mean: float, length: int) -> tuple:
    """Poisson(mean) on ``0..K`` (``K >= length - 1``) and its mass beyond ``K``."""
    if mean == 0:
        q = np.zeros(max(length, 1))
        q[0] = 1.0
        return q, 0.0
    K = max(length - 1, poisson_cap(mean, 1e-15))
    q = np.exp(log_poisson_pmf(mean, np.arange(K + 1)))
    return q, max(0.0, 1.0 - math.fsum(q))


def degree_tv(hist: np.ndarray, mean: float) -> float:
    """Total variation between a degree histogram and Poisson(mean)."""
    p = hist / hist.sum()
    q, tail = _reference_law(mean, len(p))
    p = np.pad(p, (0, len(q) - len(p)))
    return 0.5 * (math.fsum(np.abs(p - q)) + tail)


def run_mc_degree(config: ExperimentConfig) -> ResultTable:
    """Degree law of G(n, lambda_n) against Poisson(2 lambda_n / n)."""
    if config.kind != "mc-degree":
        raise ConfigError("kind", "expected mc-degree")
    rows = []
    series = {}
    for index, n in enumerate(config.n):
        edges = config.edge_budget(n, index)
        mean = 2.0 * edges / n
        jobs = [(n, config.d, edges, config.seed, a, b) for a, b in _chunks(config.replicas, config.threads)]
        hists = [h for chunk in _farm(_degree_histograms, jobs, config.threads) for h in chunk]
        width = max(len(h) for h in hists)
        pooled = np.zeros(width, dtype=np.int64)
        for h in hists:
            pooled[: len(h)] += h
        tv_each = [degree_tv(h, mean) for h in hists]
        p = pooled / pooled.sum()
        q, _ = _reference_law(mean, len(p))
        kl = relative_entropy({k: v for k, v in enumerate(p) if v > 0}, dict(enumerate(q)))
        rows.append((n, edges, config.replicas, float(np.dot(np.arange(width), p)),
                     float(np.mean(tv_each)), degree_tv(pooled, mean), kl, edges == 0))
        series[str(n)] = [[k, float(v)] for k, v in enumerate(p)]
    columns = ("n", "lambda_n", "replicas", "mean_degree", "tv_mean", "tv_pooled", "kl_pooled", "degenerate")
    return ResultTable(columns, rows, _metadata(config, pooled_degree_law=series))


# ---------------------------------------------------------------------------
# allocation coupling

def integral_measures(n: int, type_law, lam, d: int) -> tuple:
    """Integral ``(type measure, pair measure)`` close to the TRGG expectations.

    Type counts by largest-remainder apportionment of ``n * nu``; edge
    counts ``floor(n_a n_b rho(d) lam(a, b) / n)`` (``C(n_a, 2)`` in place of
    ``n_a n_b`` on the diagonal), cut back to the eligible pool if needed.
    """
    nu = np.asarray(type_law, dtype=float)
    raw = n * nu
    counts = np.floor(raw).astype(np.int64)
    short = n - int(counts.sum())
    order = sorted(range(len(nu)), key=lambda a: (-(raw[a] - counts[a]), a))
    for a in order[:short]:
        counts[a] += 1
    rho = unit_ball_volume(d)
    lam = np.asarray(lam, dtype=float)
    m = len(nu)
    edge_counts = np.zeros((m, m), dtype=np.int64)
    for a in range(m):
        for b in range(a, m):
            pool = pair_pool_size(int(counts[a]), int(counts[b]), a == b)
            target = math.floor(pool * rho * lam[a, b] / n)
            edge_counts[a, b] = edge_counts[b, a] = min(target, pool)
    check_pair_budget(counts, edge_counts)
    alphabet = TypeAlphabet.of_size(m)
    return TypeMeasure(alphabet, counts, n), PairMeasure.from_edge_counts(alphabet, edge_counts, n)


def _coupling_replicas(type_measure, pair_measure, d: int, seed: int, start: int, stop: int) -> list:
    out = []
    for r in range(start, stop):
        o = run_allocation_coupling(type_measure, pair_measure, replica_rng(seed, r, type_measure.n), dim=d)
        out.append((dict(o.mismatches), o.tv_bound(), o.tv_actual(), o.displaced_nodes()))
    return out


def run_coupling_experiment(config: ExperimentConfig) -> ResultTable:
    """Mismatch counts and total-variation diagnostics of the allocation coupling."""
    if config.kind != "coupling":
        raise ConfigError("kind", "expected coupling")
    rows = []
    summary = {}
    for n in config.n:
        tm, pm = integral_measures(n, config.type_law, config.lam, config.d)
        labels = tm.alphabet.symbols
        schedule = collision_schedule(tm, pm)
        m = len(labels)
        pairs = [(a, b) for a in range(m) for b in range(a, m)]
        bennett = {p: (bennett_tail_bound(schedule.pairs[p], config.threshold) if p in schedule.pairs else 0.0)
                   for p in pairs}
        jobs = [(tm, pm, config.d, config.seed, a, b) for a, b in _chunks(config.replicas, config.threads)]
        results = [res for chunk in _farm(_coupling_replicas, jobs, config.threads) for res in chunk]
        violations = displaced_violations = 0
        for r, (mism, bound, actual, displaced) in enumerate(results):
            violations += actual > bound
            displaced_violations += actual > displaced / n
            for p in pairs:
                rows.append((r, f"{labels[p[0]]}|{labels[p[1]]}", mism[p], bound, actual, bennett[p]))
        mean_b = {}
        for p in pairs:
            key = f"{labels[p[0]]}|{labels[p[1]]}"
            mean_b[key] = float(np.mean([res[0][p] for res in results]))
            rows.append(("mean", key, mean_b[key], float(np.mean([res[1] for res in results])),
                         float(np.mean([res[2] for res in results])), bennett[p]))
        rows.append(("violations", "all", violations, None, None, max(bennett.values())))
        summary[str(n)] = {
            "type_counts": tm.counts.tolist(),
            "edge_counts": pm.edge_counts.tolist(),
            "mean_B": mean_b,
            "expected_B_limit": {f"{labels[a]}|{labels[b]}": 1 + (a == b) for a, b in pairs},
            "tv_bound_violations": violations,
            "displaced_bound_violations": displaced_violations,
            "max_bennett_bound": max(bennett.values()),
        }
    columns = ("replica", "pair", "B", "tv_bound", "tv_actual", "bennett_bound_at_threshold")
    return ResultTable(columns, rows, _metadata(config, summary=summary))


# ---------------------------------------------------------------------------
# rate sweep

def run_rates_sweep(config: ExperimentConfig) -> ResultTable:
    """Detached-node rate and its numerical oracle over a grid of ``y``."""
    if config.kind != "rates-sweep":
        raise ConfigError("kind", "expected rates-sweep")
    grid = config.y_grid if config.y_grid is not None else (config.y,)
    mu = unit_ball_volume(config.d) * config.t
    rows = []
    for y in grid:
        ev = rate_xi(y, config.d, config.t)
        try:
            oracle = xi_numerical_oracle(y, mu)
        except InfeasibleConstraints:
            oracle = math.inf
        diff = abs(ev.value - oracle) if math.isfinite(ev.value) and math.isfinite(oracle) else None
        rows.append((y, mu, ev.value, ev.feasible, ev.diagnostics.get("alpha"), oracle, diff))
    columns = ("y", "mu", "xi", "feasible", "alpha", "oracle", "abs_diff")
    return ResultTable(columns, rows, _metadata(config, mu=mu))


RUNNERS = {
    "mc-isolated": run_mc_isolated,
    "mc-degree": run_mc_degree,
    "coupling": run_coupling_experiment,
    "rates-sweep": run_rates_sweep,
}


def run_experiment(config: ExperimentConfig) -> ResultTable:
    return RUNNERS[config.kind](config)


def plot_series(table: ResultTable) -> dict:
    """``{name: [(x, y), ...]}`` series for external plotting."""
    kind = table.metadata.get("kind")
    if kind == "mc-isolated":
        out = {"rate_hat": [(r["n"], r["rate_hat"]) for r in table.records()],
               "xi": [(r["n"], r["xi"]) for r in table.records()]}
        exact = [(r["n"], r["rate_exact"]) for r in table.records() if r["rate_exact"] is not None]
        if exact:
            out["rate_exact"] = exact
        return out
    if kind == "mc-degree":
        return {f"degree_law_n{n}": [tuple(p) for p in pts]
                for n, pts in table.metadata["pooled_degree_law"].items()}
    if kind == "coupling":
        recs = [r for r in table.records() if isinstance(r["replica"], int)]
        seen = {}
        for r in recs:
            seen.setdefault(r["replica"], (r["tv_bound"], r["tv_actual"]))
        return {"tv_bound": [(k, v[0]) for k, v in seen.items()],
                "tv_actual": [(k, v[1]) for k, v in seen.items()]}
    if kind == "rates-sweep":
        return {"xi": [(r["y"], r["xi"]) for r in table.records()],
                "oracle": [(r["y"], r["oracle"]) for r in table.records()]}
    raise ValueError(f"no plot series for table kind {kind!r}")
