"""Command line entry point ``trgg``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 infeasible
input.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .harness import ConfigError, ExperimentConfig, emit_results, plot_series, run_experiment
from .measures import (
    PairMeasure,
    TypeAlphabet,
    TypeMeasure,
    check_consistency,
    degree_distribution,
    empirical_locality_measure,
    empirical_pair_measure,
    empirical_type_measure,
)
from .models import InfeasibleError, ModelParams, TypedGraph, sample_conditional_trgg, sample_gnm_geometric, sample_trgg
from .rates import InfeasibleConstraints, rate_eta, rate_J, rate_xi

EXIT_IO, EXIT_CONFIG, EXIT_INFEASIBLE = 1, 2, 3


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON ({exc.msg})") from None


def _write(data: bytes, out) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    path = Path(out)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def _dump(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


# ---------------------------------------------------------------------------

def cmd_sample(args) -> None:
    cfg = _read_json(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    model = cfg.get("model", "trgg")
    d = int(cfg.get("d", 2))
    if model == "trgg":
        params = ModelParams(n=int(cfg["n"]), dim=d, type_law=cfg.get("type_law", [1.0]),
                             lam=cfg["lam"], torus=bool(cfg.get("torus", False)), seed=seed)
        graph = sample_trgg(params)
    elif model == "gnm":
        graph = sample_gnm_geometric(int(cfg["n"]), d, int(cfg["edges"]), seed)
    elif model == "conditional":
        counts = cfg["type_counts"]
        alphabet = TypeAlphabet(tuple(cfg["alphabet"])) if "alphabet" in cfg else TypeAlphabet.of_size(len(counts))
        tm = TypeMeasure(alphabet, counts)
        pm = PairMeasure.from_edge_counts(alphabet, cfg["edge_counts"], tm.n)
        graph = sample_conditional_trgg(tm, pm, seed, dim=d)
    else:
        raise ConfigError("model", "must be trgg, gnm or conditional")
    fmt = args.format or "json"
    if fmt == "edgelist":
        _write(graph.to_edgelist().encode(), args.out)
    elif fmt == "json":
        _write((graph.to_json() + "\n").encode(), args.out)
    else:
        raise ConfigError("format", "sample writes json or edgelist")


def cmd_measure(args) -> None:
    source = args.graph
    if source is None and args.config is not None:
        source = _read_json(args.config).get("graph")
    if source is None:
        raise ConfigError("graph", "give --graph or a config with a 'graph' path")
    try:
        graph = TypedGraph.from_json(Path(source).read_text())
    except OSError as exc:
        raise ConfigError("graph", f"cannot read {source}: {exc.strerror}") from None
    except (KeyError, json.JSONDecodeError) as exc:
        raise ConfigError("graph", f"{source} is not a graph file ({exc})") from None
    ell = empirical_locality_measure(graph)
    pair = empirical_pair_measure(graph)
    out = {
        "type": empirical_type_measure(graph).to_dict(),
        "pair": pair.to_dict(),
        "locality": ell.to_dict(),
        "degree": degree_distribution(ell).to_dict(),
        "consistent": check_consistency(pair, ell),
    }
    _write(_dump(out), args.out)


def _locality_input(raw, alphabet_size: int) -> dict:
    out = {}
    for a, sigma, p in raw:
        if len(sigma) != alphabet_size:
            raise ConfigError("ell", "neighbor vectors must have one entry per type")
        out[(int(a), tuple(int(s) for s in sigma))] = float(p)
    return out


def cmd_rates(args) -> None:
    cfg = _read_json(args.config)
    fn = cfg.get("function")
    try:
        if fn == "xi":
            ev = rate_xi(float(cfg["y"]), int(cfg.get("d", 2)), float(cfg["t"]))
        elif fn == "eta":
            delta = {int(k): float(v) for k, v in cfg["delta"].items()}
            ev = rate_eta(delta, int(cfg.get("d", 2)), float(cfg["t"]))
        elif fn == "J":
            varpi = np.asarray(cfg["varpi"], dtype=float)
            ev = rate_J(varpi, np.asarray(cfg["omega"], dtype=float), _locality_input(cfg["ell"], len(varpi)))
        else:
            raise ConfigError("function", "must be J, eta or xi")
    except KeyError as exc:
        raise ConfigError(exc.args[0], "missing") from None
    result = {"function": fn, **ev.to_dict()}
    _write(_dump(result), args.out)


def cmd_experiment(args) -> None:
    data = _read_json(args.config)
    if data.get("kind", args.command) != args.command:
        raise ConfigError("kind", f"config is for {data['kind']!r}, not {args.command!r}")
    data["kind"] = args.command
    config = ExperimentConfig.from_dict(data).replace(seed=args.seed, threads=args.threads, output=args.out)
    table = run_experiment(config)
    fmt = args.format or "csv"
    if fmt not in ("csv", "json"):
        raise ConfigError("format", "experiments write csv or json")
    _write(emit_results(table, fmt), config.output)
    if args.emit_plot_data:
        if config.output is None:
            raise ConfigError("output", "--emit-plot-data needs --out")
        base = Path(config.output)
        for name, points in plot_series(table).items():
            lines = "".join(f"{x!r} {y!r}\n" for x, y in points)
            _write(lines.encode(), base.with_name(f"{base.stem}.{name}.dat"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trgg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker processes (overrides the config)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=formats)
        p.add_argument("--emit-plot-data", action="store_true", help="write (x, y) series next to --out")

    p = sub.add_parser("sample", help="sample a graph")
    common(p, ["json", "edgelist"])
    p.set_defaults(func=cmd_sample, needs_config=True)

    p = sub.add_parser("measure", help="empirical measures of a graph file")
    common(p, ["json"])
    p.add_argument("--graph", help="graph JSON written by 'trgg sample'")
    p.set_defaults(func=cmd_measure, needs_config=False)

    p = sub.add_parser("rates", help="evaluate J, eta or xi")
    common(p, ["json"])
    p.set_defaults(func=cmd_rates, needs_config=True)

    for kind in ("mc-isolated", "mc-degree", "coupling", "rates-sweep"):
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        common(p, ["csv", "json"])
        p.set_defaults(func=cmd_experiment, needs_config=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.needs_config and args.config is None:
            raise ConfigError("config", "--config is required")
        args.func(args)
    except (InfeasibleError, InfeasibleConstraints) as exc:
        print(f"trgg: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"trgg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"trgg: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError) as exc:
        print(f"trgg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
