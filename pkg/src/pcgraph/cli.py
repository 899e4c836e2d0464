"""Command-line interface: ``pcgraph {localize,decompose,learn,curves,synth}``.

Results go to stdout as JSON, logs to stderr. Exit status is 0 on success,
1 on bad input and 2 when the solver found no piece.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import synth
from .decompose import decompose
from .dictlearn import atom_usage, frobenius_objective, learn_dictionary
from .experiments import ExperimentConfig, run_curves, write_curves
from .graph import EmptyResultError, read_edge_list, write_edge_list
from .localize import LambdaGrid, QPNotConvergedError, get_localizer, localize_unknown
from .metrics import nmse

log = logging.getLogger("pcgraph")

EXIT_INPUT = 1
EXIT_EMPTY = 2


def _emit(doc, pretty: bool) -> None:
    json.dump(doc, sys.stdout, indent=2 if pretty else None, sort_keys=False)
    sys.stdout.write("\n")


def _load_signal(graph, path, column: int) -> np.ndarray:
    X = synth.read_signals_csv(path)
    if X.shape[0] != graph.n:
        raise ValueError(f"{path}: {X.shape[0]} rows but the graph has {graph.n} nodes")
    if not 0 <= column < X.shape[1]:
        raise ValueError(f"{path}: no signal column {column}")
    return X[:, column]


def _grid(text):
    return LambdaGrid.parse(text) if text else None


def cmd_localize(args) -> int:
    graph = read_edge_list(args.graph)
    x = _load_signal(graph, args.signal, args.column)
    grid = _grid(args.lambda_grid)
    if args.unknown_magnitude:
        mu, res = localize_unknown(graph, x, grid, method=args.method)
    else:
        res = get_localizer(args.method, grid)(graph, x)
        mu = 1.0
    _emit(
        {
            "method": res.method,
            "nodes": list(res.piece.nodes),
            "magnitude": mu,
            "objective": res.objective,
            "lambda": res.lambda_used,
            "source": res.source,
        },
        args.pretty,
    )
    return 0


def cmd_decompose(args) -> int:
    graph = read_edge_list(args.graph)
    x = _load_signal(graph, args.signal, args.column)
    dec = decompose(graph, x, args.pieces, _grid(args.lambda_grid), args.max_sweeps, args.tol, method=args.method)
    model = dec.model(graph.n)
    _emit(
        {
            "pieces": [{"nodes": list(p.nodes), "magnitude": p.magnitude} for p in dec.pieces],
            "objective_trace": dec.objective_trace,
            "objective": dec.objective,
            "nmse": nmse(model, x) if np.any(x) else None,
        },
        args.pretty,
    )
    return 0


def cmd_learn(args) -> int:
    graph = read_edge_list(args.graph)
    X = synth.read_signals_csv(args.signals)
    if X.shape[0] != graph.n:
        raise ValueError(f"{args.signals}: {X.shape[0]} rows but the graph has {graph.n} nodes")
    D, Z, trace = learn_dictionary(
        graph, X, args.atoms, args.sparsity, _grid(args.lambda_grid), args.iters, seed=args.seed, method=args.method
    )
    usage = atom_usage(Z)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "dictionary": out / "dictionary.json",
        "coefficients": out / "coefficients.json",
        "usage": out / "usage.json",
    }
    docs = {
        "dictionary": D.to_json(),
        "coefficients": Z.to_json(),
        "usage": {
            "atoms": usage.report(),
            "common": usage.common(args.top),
            "special": usage.special(args.rare),
        },
    }
    for key, path in files.items():
        with open(path, "w") as fh:
            json.dump(docs[key], fh, indent=1)
            fh.write("\n")
    _emit(
        {
            "files": {k: str(v) for k, v in files.items()},
            "objective": frobenius_objective(X, D, Z),
            "objective_trace": trace,
        },
        args.pretty,
    )
    return 0


def cmd_curves(args) -> int:
    cfg = ExperimentConfig.load(
        args.config, seed=args.seed, trials=args.trials, output_dir=args.output_dir, workers=args.workers
    )
    if cfg.task not in ("curves", "localize"):
        raise ValueError(f"curves runs localization sweeps; config task is {cfg.task!r}")
    table = run_curves(cfg)
    paths = write_curves(table, cfg.output_dir)
    _emit({"files": [str(p) for p in paths]}, args.pretty)
    return 0


def cmd_synth(args) -> int:
    graph = synth.gen_geometric_graph(args.n, args.radius, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    signals, truths = [], []
    for j in range(args.signals):
        rng = synth.trial_rng(args.seed, j)
        pieces = []
        for _ in range(args.pieces):
            p = (
                synth.random_ball_piece(graph, args.k, rng)
                if args.shape == "ball"
                else synth.random_path_piece(graph, args.length, rng)
            )
            mu = 1.0 if args.pieces == 1 else float(rng.uniform(0.5, 1.5))
            pieces.append(p.with_magnitude(mu))
        noise = synth.NoiseSpec(args.sigma2, int(rng.integers(2**63)))
        signals.append(synth.gen_signal(graph, pieces, noise))
        truths.append([{"nodes": list(p.nodes), "magnitude": p.magnitude} for p in pieces])
    write_edge_list(graph, out / "graph.txt")
    synth.write_signals_csv(out / "signals.csv", np.column_stack(signals))
    with open(out / "truth.json", "w") as fh:
        json.dump({"signals": truths}, fh, indent=1)
        fh.write("\n")
    _emit({"nodes": graph.n, "edges": graph.m, "out_dir": str(out)}, args.pretty)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcgraph", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    p.add_argument("--pretty", action="store_true", help="indent JSON output")
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("graph", help="edge-list file")
        sp.add_argument("signal", help="signal CSV (node,sig0,...)")
        sp.add_argument("--column", type=int, default=0, help="which signal column to use")
        sp.add_argument("--lambda-grid", help="comma-separated cut weights, starting at 0")
        sp.add_argument(
            "--method", default="combined", choices=["hard", "cut", "path", "path_relax", "path_sp", "combined"]
        )

    sp = sub.add_parser("localize", help="localize one piece")
    solver_opts(sp)
    sp.add_argument("--unknown-magnitude", action="store_true", help="also fit the magnitude")
    sp.set_defaults(func=cmd_localize)

    sp = sub.add_parser("decompose", help="decompose a signal into K pieces")
    solver_opts(sp)
    sp.add_argument("--pieces", "-K", type=int, required=True)
    sp.add_argument("--max-sweeps", type=int, default=50)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("learn", help="learn a piece dictionary from many signals")
    sp.add_argument("graph")
    sp.add_argument("signals", help="signal matrix CSV, one column per signal")
    sp.add_argument("--atoms", "-K", type=int, default=20)
    sp.add_argument("--sparsity", "-S", type=int, default=3)
    sp.add_argument("--iters", type=int, default=30)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lambda-grid")
    sp.add_argument("--method", default="combined", choices=["hard", "cut", "path", "combined"])
    sp.add_argument("--top", type=int, default=5, help="how many most-used atoms to list as common")
    sp.add_argument("--rare", type=int, default=3, help="usage at or below which an atom counts as special")
    sp.add_argument("--out-dir", default="dictionary")
    sp.set_defaults(func=cmd_learn)

    sp = sub.add_parser("curves", help="Monte Carlo F1/Hamming curves from a JSON config")
    sp.add_argument("config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--output-dir")
    sp.add_argument("--workers", type=int, help="worker processes (default: $PCGRAPH_WORKERS or 1)")
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("synth", help="write a geometric graph and noisy piece signals")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--radius", type=float, default=0.08)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--shape", choices=["ball", "path"], default="ball")
    sp.add_argument("--k", type=int, default=3, help="ball radius in hops")
    sp.add_argument("--length", type=int, default=20, help="path length in hops")
    sp.add_argument("--pieces", type=int, default=1, help="pieces per signal")
    sp.add_argument("--signals", type=int, default=1)
    sp.add_argument("--sigma2", type=float, default=0.0)
    sp.add_argument("--out-dir", default="synth")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EmptyResultError as exc:
        print(f"pcgraph: no piece found: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (ValueError, OSError, KeyError, QPNotConvergedError, json.JSONDecodeError) as exc:
        print(f"pcgraph: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
