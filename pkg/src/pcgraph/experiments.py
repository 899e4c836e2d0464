"""Monte Carlo localization curves: F1 and Hamming distance against noise level.

Each trial draws one piece and one standard-normal noise vector from its
own seed and reuses them at every noise level, so the levels are compared
on common random numbers.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth
from .baselines import glap_localize
from .graph import EmptyResultError, Graph, Piece, read_edge_list
from .localize import (
    LambdaGrid,
    QPNotConvergedError,
    combine,
    cut_localize,
    hard_threshold_localize,
    path_localize,
)
from .metrics import f1, hamming

TASKS = ("localize", "localize-unknown", "decompose", "learn", "curves")
CURVE_METHODS = ("hard", "cut", "path", "combined")
WORKERS_ENV = "PCGRAPH_WORKERS"


@dataclass
class ExperimentConfig:
    graph: dict
    piece: dict
    task: str = "curves"
    sigma2: list[float] = field(default_factory=lambda: list(synth.NOISE_SWEEP))
    trials: int = 100
    seed: int = 0
    methods: list[str] = field(default_factory=lambda: list(CURVE_METHODS))
    glap_lambdas: list[float] = field(default_factory=list)
    lambda_grid: list[float] | None = None
    output_dir: str = "curves"
    workers: int | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(s < 0 for s in self.sigma2):
            raise ValueError("noise variances must be nonnegative")
        bad = [m for m in self.methods if m not in CURVE_METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected a subset of {CURVE_METHODS}")
        if "file" in self.graph:
            if not Path(self.graph["file"]).is_file():
                raise ValueError(f"graph file {self.graph['file']} does not exist")
        elif self.graph.get("generator") != "geometric":
            raise ValueError("graph needs either 'file' or 'generator': 'geometric'")
        shape = self.piece.get("shape")
        if shape == "ball":
            int(self.piece["k"])
        elif shape == "path":
            lo, hi = _length_band(self.piece["length"])
            if not 1 <= lo <= hi:
                raise ValueError(f"path length band must satisfy 1 <= lo <= hi, got {self.piece['length']}")
        elif shape == "file":
            if not Path(self.piece["path"]).is_file():
                raise ValueError(f"piece file {self.piece['path']} does not exist")
        else:
            raise ValueError("piece shape must be 'ball', 'path' or 'file'")

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        with open(path) as fh:
            doc = json.load(fh)
        base = Path(path).parent
        # relative paths in the config are relative to the config file
        if "file" in doc.get("graph", {}):
            doc["graph"]["file"] = str(base / doc["graph"]["file"])
        if doc.get("piece", {}).get("shape") == "file":
            doc["piece"]["path"] = str(base / doc["piece"]["path"])
        doc.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def build_graph(self) -> Graph:
        if "file" in self.graph:
            return read_edge_list(self.graph["file"])
        g = self.graph
        return synth.gen_geometric_graph(int(g["n"]), float(g["radius"]), int(g.get("seed", 0)))

    def grid(self) -> LambdaGrid | None:
        return LambdaGrid(tuple(self.lambda_grid)) if self.lambda_grid else None

    def method_names(self) -> list[str]:
        return list(self.methods) + [f"glap_{lam:g}" for lam in self.glap_lambdas]


def _length_band(length) -> tuple[int, int]:
    """A path length is either one hop count or an inclusive ``[lo, hi]`` band."""
    if isinstance(length, (list, tuple)):
        lo, hi = length
        return int(lo), int(hi)
    return int(length), int(length)


def _draw_piece(graph: Graph, spec: dict, rng):
    shape = spec["shape"]
    if shape == "ball":
        return synth.random_ball_piece(graph, int(spec["k"]), rng)
    if shape == "path":
        lo, hi = _length_band(spec["length"])
        length = lo if lo == hi else int(rng.integers(lo, hi + 1))
        return synth.random_path_piece(graph, length, rng)
    with open(spec["path"]) as fh:
        return Piece(tuple(json.load(fh)["nodes"])).check(graph)


def _score(res, truth):
    nodes = () if res is None else res.piece.nodes
    return f1(nodes, truth), hamming(nodes, truth)


def _safe(fn, *args):
    try:
        return fn(*args)
    except (EmptyResultError, QPNotConvergedError):
        return None


def run_trial(graph: Graph, cfg: ExperimentConfig, trial: int) -> np.ndarray:
    """Scores for one trial: array of shape ``(levels, methods, 2)`` (F1, Hamming)."""
    rng = synth.trial_rng(cfg.seed, trial)
    truth = _draw_piece(graph, cfg.piece, rng).nodes
    z = rng.standard_normal(graph.n)
    base = np.zeros(graph.n)
    base[list(truth)] = 1.0
    grid = cfg.grid()
    need_cut = {"cut", "combined"} & set(cfg.methods)
    need_path = {"path", "combined"} & set(cfg.methods)
    names = cfg.method_names()
    out = np.zeros((len(cfg.sigma2), len(names), 2))
    for a, s2 in enumerate(cfg.sigma2):
        x = base + np.sqrt(s2) * z
        results = {}
        if "hard" in cfg.methods:
            results["hard"] = _safe(hard_threshold_localize, graph, x)
        if need_cut:
            results["cut"] = _safe(cut_localize, graph, x, grid)
        if need_path:
            results["path"] = _safe(path_localize, graph, x)
        if "combined" in cfg.methods:
            results["combined"] = _safe(combine, results["cut"], results["path"])
        for lam in cfg.glap_lambdas:
            results[f"glap_{lam:g}"] = _safe(glap_localize, graph, x, lam)
        for b, name in enumerate(names):
            out[a, b] = _score(results[name], truth)
    return out


def _run_chunk(args):
    graph, cfg, trials = args
    return [run_trial(graph, cfg, t) for t in trials]


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def run_curves(cfg: ExperimentConfig, graph: Graph | None = None) -> dict[str, list[dict]]:
    """Run the sweep and return ``{method: rows}`` with one row per noise level."""
    graph = graph or cfg.build_graph()
    workers = cfg.workers or default_workers()
    trials = list(range(cfg.trials))
    if workers == 1:
        scores = _run_chunk((graph, cfg, trials))
    else:
        chunks = [trials[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_run_chunk, [(graph, cfg, c) for c in chunks]))
        scores = [None] * cfg.trials
        for chunk, part in zip(chunks, parts):
            for t, s in zip(chunk, part):
                scores[t] = s
    # sum in trial order so the result does not depend on the worker count
    total = np.zeros_like(scores[0])
    for s in scores:
        total += s
    mean = total / cfg.trials
    table = {}
    for b, name in enumerate(cfg.method_names()):
        table[name] = [
            {"sigma2": s2, "mean_f1": float(mean[a, b, 0]), "mean_hamming": float(mean[a, b, 1]), "trials": cfg.trials}
            for a, s2 in enumerate(cfg.sigma2)
        ]
    return table


CSV_COLUMNS = ("sigma2", "mean_f1", "mean_hamming", "trials")


def write_curves(table: dict[str, list[dict]], outdir) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in table.items():
        p = outdir / f"{name}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow([repr(float(r["sigma2"])), repr(r["mean_f1"]), repr(r["mean_hamming"]), r["trials"]])
        paths.append(p)
    return paths


def read_curve(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: expected columns {CSV_COLUMNS}")
        return [
            {"sigma2": float(r["sigma2"]), "mean_f1": float(r["mean_f1"]),
             "mean_hamming": float(r["mean_hamming"]), "trials": int(r["trials"])}
            for r in reader
        ]
