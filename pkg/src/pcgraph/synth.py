"""Synthetic graphs, pieces and noisy piecewise-constant signals.

Randomness comes from numpy's PCG64 generator (``np.random.default_rng``).
Per-trial streams are derived with ``SeedSequence((seed, trial))``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .graph import Graph, Piece, bfs_distances


@dataclass(frozen=True)
class NoiseSpec:
    sigma2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 < 0:
            raise ValueError(f"noise variance must be finite and >= 0, got {self.sigma2}")


NOISE_SWEEP = tuple(round(0.1 * k, 1) for k in range(1, 11))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(trial))))


def gen_geometric_graph(n: int, radius: float, seed: int, min_size: int = 10) -> Graph:
    """Random geometric graph on the unit square, reduced to its largest component.

    Nodes of the kept component are relabeled ``0..n'-1`` in their original
    order. Raises if the component has fewer than ``min(min_size, n)`` nodes.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    pairs = np.sort(pairs, axis=1) if len(pairs) else np.empty((0, 2), dtype=np.int64)
    g = Graph.from_edges(n, pairs)
    _, labels = connected_components(g.adjacency, directed=False)
    counts = np.bincount(labels)
    keep = np.flatnonzero(labels == np.argmax(counts))
    if len(keep) < min(min_size, n):
        raise ValueError(f"largest component has only {len(keep)} nodes")
    relabel = np.full(n, -1, dtype=np.int64)
    relabel[keep] = np.arange(len(keep))
    e = g.edges
    e = e[(relabel[e[:, 0]] >= 0) & (relabel[e[:, 1]] >= 0)]
    return Graph.from_edges(len(keep), relabel[e])


def grid_graph(rows: int, cols: int) -> Graph:
    idx = np.arange(rows * cols).reshape(rows, cols)
    right = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    down = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return Graph.from_edges(rows * cols, np.vstack([right, down]))


def gen_ball_piece(graph: Graph, center: int, k: int) -> Piece:
    """All nodes within ``k`` hops of ``center``."""
    if not 0 <= center < graph.n:
        raise ValueError(f"center {center} outside [0, {graph.n})")
    dist = bfs_distances(graph, center)
    return Piece(tuple(np.flatnonzero((dist >= 0) & (dist <= k)).tolist()))


def gen_path_piece(graph: Graph, s: int, t: int) -> Piece:
    """Hop-shortest path from ``s`` to ``t``.

    Walking back from ``t``, each step goes to the smallest-id neighbor one
    hop closer to ``s``.
    """
    for v in (s, t):
        if not 0 <= v < graph.n:
            raise ValueError(f"node {v} outside [0, {graph.n})")
    if s == t:
        raise ValueError("a path needs two distinct endpoints")
    dist = bfs_distances(graph, s)
    if dist[t] < 0:
        raise ValueError(f"nodes {s} and {t} are disconnected")
    path = [t]
    while path[-1] != s:
        u = path[-1]
        path.append(min(w for w in graph.neighbors(u) if dist[w] == dist[u] - 1))
    return Piece(tuple(path))


def random_ball_piece(graph: Graph, k: int, rng: np.random.Generator) -> Piece:
    return gen_ball_piece(graph, int(rng.integers(graph.n)), k)


def random_path_piece(graph: Graph, length: int, rng: np.random.Generator, max_tries: int = 1000) -> Piece:
    """Shortest path whose endpoints are exactly ``length`` hops apart."""
    for _ in range(max_tries):
        s = int(rng.integers(graph.n))
        cand = np.flatnonzero(bfs_distances(graph, s) == length)
        if len(cand):
            return gen_path_piece(graph, s, int(rng.choice(cand)))
    raise ValueError(f"could not find two nodes {length} hops apart")


def random_connected_piece(graph: Graph, size: int, rng: np.random.Generator) -> Piece:
    """Connected piece grown by random frontier expansion from a random seed node."""
    start = int(rng.integers(graph.n))
    nodes = {start}
    frontier = set(graph.neighbors(start))
    while len(nodes) < size and frontier:
        v = sorted(frontier)[int(rng.integers(len(frontier)))]
        frontier.discard(v)
        nodes.add(v)
        frontier.update(w for w in graph.neighbors(v) if w not in nodes)
    return Piece(tuple(nodes))


def gen_signal(graph: Graph, pieces, noise: NoiseSpec = NoiseSpec()) -> np.ndarray:
    """``sum mu_i 1_{C_i}`` plus i.i.d. ``N(0, sigma2)`` noise.

    ``pieces`` holds ``Piece`` objects (their own magnitude is used) or
    ``(Piece, mu)`` pairs.
    """
    x = np.zeros(graph.n)
    for item in pieces:
        piece, mu = item if isinstance(item, tuple) else (item, item.magnitude)
        if piece.nodes[-1] >= graph.n:
            raise ValueError(f"piece node {piece.nodes[-1]} outside graph of {graph.n} nodes")
        x[list(piece.nodes)] += mu
    if noise.sigma2 > 0:
        x += np.sqrt(noise.sigma2) * np.random.default_rng(noise.seed).standard_normal(graph.n)
    return x


def write_signals_csv(path, signals) -> None:
    """Write an ``(N, L)`` matrix (or one vector) with header ``node,sig0,...``."""
    X = np.asarray(signals, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"sig{j}" for j in range(X.shape[1])])
        for i, row in enumerate(X.tolist()):
            w.writerow([i] + [repr(v) for v in row])


def read_signals_csv(path) -> np.ndarray:
    """Read a signal CSV back as an ``(N, L)`` array, rows ordered by node id."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0].strip() != "node":
        raise ValueError(f"{path}: expected header starting with 'node'")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    ids = np.array([int(r[0]) for r in body])
    vals = np.array([[float(v) for v in r[1:]] for r in body])
    if vals.ndim != 2 or vals.shape[1] != len(rows[0]) - 1:
        raise ValueError(f"{path}: ragged rows")
    if sorted(ids.tolist()) != list(range(len(ids))):
        raise ValueError(f"{path}: node ids must be 0..N-1")
    out = np.empty_like(vals)
    out[ids] = vals
    return out
