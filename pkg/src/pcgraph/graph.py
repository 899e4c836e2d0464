"""Undirected graphs, pieces and the combinatorial primitives built on them.

Nodes are the integers ``0 .. n-1``. Edges are stored once, as ``(u, v)``
with ``u < v``; the incidence matrix orients each row ``+1`` at ``u`` and
``-1`` at ``v``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra


class EmptyResultError(ValueError):
    """Raised when a solver activates no node, so there is no piece to report."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected simple graph.

    Use :meth:`from_edges` to build one; it validates, orients and
    deduplicates the edge list.
    """

    n: int
    edges: np.ndarray  # (M, 2) int64, rows sorted, u < v
    _neighbors: tuple = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]]) -> "Graph":
        n = int(n)
        if n < 0:
            raise ValueError(f"node count must be nonnegative, got {n}")
        arr = np.asarray(edges if isinstance(edges, np.ndarray) else list(edges), dtype=np.int64)
        if arr.size == 0:
            arr = np.empty((0, 2), dtype=np.int64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("edges must be pairs of node ids")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ValueError("self-loops are not allowed")
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0)
        arr.setflags(write=False)
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for u, v in arr.tolist():
            nbrs[u].append(v)
            nbrs[v].append(u)
        return cls(n, arr, tuple(tuple(sorted(a)) for a in nbrs))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    @cached_property
    def degree(self) -> np.ndarray:
        return np.array([len(a) for a in self._neighbors], dtype=np.int64)

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency matrix (each undirected edge appears twice)."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(len(rows))
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Edge-by-node signed incidence matrix, +1 at the smaller endpoint."""
        m = self.m
        rows = np.repeat(np.arange(m), 2)
        cols = self.edges.reshape(-1)
        data = np.tile([1.0, -1.0], m)
        return sp.csr_matrix((data, (rows, cols)), shape=(m, self.n))

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        return (sp.diags(self.degree.astype(float)) - self.adjacency).tocsr()

    def mask_of(self, nodes: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        idx = np.fromiter(nodes, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise ValueError(f"node id outside [0, {self.n})")
        mask[idx] = True
        return mask

    def is_connected_set(self, nodes: Iterable[int]) -> bool:
        nodes = list(nodes)
        if not nodes:
            return False
        return len(connected_components(self, nodes)) == 1


@dataclass(frozen=True)
class Piece:
    """A nonempty node set with a constant magnitude."""

    nodes: tuple[int, ...]
    magnitude: float = 1.0

    def __post_init__(self):
        nodes = tuple(sorted({int(i) for i in self.nodes}))
        if not nodes:
            raise ValueError("a piece needs at least one node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "magnitude", float(self.magnitude))

    def __len__(self) -> int:
        return len(self.nodes)

    def indicator(self, n: int) -> np.ndarray:
        v = np.zeros(n)
        v[list(self.nodes)] = 1.0
        return v

    def signal(self, n: int) -> np.ndarray:
        return self.magnitude * self.indicator(n)

    def with_magnitude(self, mu: float) -> "Piece":
        return Piece(self.nodes, mu)

    def check(self, graph: Graph) -> "Piece":
        if self.nodes[-1] >= graph.n:
            raise ValueError(f"piece node {self.nodes[-1]} outside graph of {graph.n} nodes")
        if not graph.is_connected_set(self.nodes):
            raise ValueError("piece is not connected in the graph")
        return self


def as_signal(graph: Graph, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (graph.n,):
        raise ValueError(f"signal has shape {x.shape}, graph has {graph.n} nodes")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    return x


def connected_components(graph: Graph, mask) -> list[list[int]]:
    """Split a node set into the components of its induced subgraph.

    ``mask`` is either a boolean vector of length ``n`` or an iterable of
    node ids. Components come back as sorted lists, ordered by their
    smallest node.
    """
    if isinstance(mask, np.ndarray) and mask.dtype == bool:
        inside = mask
    else:
        inside = graph.mask_of(mask)
    seen = np.zeros(graph.n, dtype=bool)
    comps = []
    nbrs = graph._neighbors
    for s in np.flatnonzero(inside).tolist():
        if seen[s]:
            continue
        seen[s] = True
        comp = [s]
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in nbrs[u]:
                if inside[w] and not seen[w]:
                    seen[w] = True
                    comp.append(w)
                    queue.append(w)
        comp.sort()
        comps.append(comp)
    return comps


def project_to_piece(graph: Graph, mask) -> Piece | None:
    """Largest connected component of ``mask``; ties go to the smallest node id."""
    comps = connected_components(graph, mask)
    if not comps:
        return None
    # comps are ordered by min node id, and max() keeps the first maximum
    return Piece(tuple(max(comps, key=len)))


def cut_count(graph: Graph, nodes) -> int:
    """Number of edges with exactly one endpoint in ``nodes``."""
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        inside = nodes
    else:
        inside = graph.mask_of(nodes)
    if graph.m == 0:
        return 0
    return int(np.count_nonzero(inside[graph.edges[:, 0]] != inside[graph.edges[:, 1]]))


def bfs_distances(graph: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source``; unreachable nodes get -1."""
    dist = np.full(graph.n, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    nbrs = graph._neighbors
    while queue:
        u = queue.popleft()
        for w in nbrs[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def _weight_matrix(graph: Graph, edge_weights) -> sp.csr_matrix:
    w = np.asarray(edge_weights, dtype=float)
    if w.shape != (graph.m,):
        raise ValueError(f"expected {graph.m} edge weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("edge weights must be finite")
    if np.any(w < 0):
        raise ValueError("edge weights must be nonnegative")
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    # explicit zeros are kept as zero-weight edges by csgraph
    return sp.csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
        shape=(graph.n, graph.n),
    )


def shortest_paths_from(graph: Graph, source: int, edge_weights) -> tuple[np.ndarray, np.ndarray]:
    """Single-source Dijkstra on nonnegative edge weights.

    Returns ``(dist, pred)``; unreachable nodes have ``inf`` distance and
    ``pred == -1``, as does the source.
    """
    if not 0 <= source < graph.n:
        raise ValueError(f"source {source} outside [0, {graph.n})")
    W = _weight_matrix(graph, edge_weights)
    dist, pred = dijkstra(W, directed=False, indices=source, return_predecessors=True)
    pred = np.where(pred < 0, -1, pred).astype(np.int64)
    return dist, pred


def all_pairs_shortest_paths(graph: Graph, edge_weights) -> tuple[np.ndarray, np.ndarray]:
    """Dijkstra from every source. Returns ``(dist, pred)`` as ``(n, n)`` arrays."""
    W = _weight_matrix(graph, edge_weights)
    dist, pred = dijkstra(W, directed=False, return_predecessors=True)
    return dist, np.where(pred < 0, -1, pred).astype(np.int64)


def path_from_predecessors(pred_row: np.ndarray, source: int, target: int) -> list[int]:
    path = [target]
    while path[-1] != source:
        p = int(pred_row[path[-1]])
        if p < 0:
            raise ValueError(f"node {target} is unreachable from {source}")
        path.append(p)
    path.reverse()
    return path


def read_edge_list(path) -> Graph:
    """Parse the edge-list text format.

    One edge per line as two 0-based ids; ``#`` lines are comments. A line
    ``N <count>`` fixes the node count, otherwise it is ``1 + max id``.
    """
    n = None
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "N":
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: malformed header {line!r}")
                n = int(parts[1])
                continue
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            edges.append((u, v))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return Graph.from_edges(n, edges)


def write_edge_list(graph: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"N {graph.n}\n")
        for u, v in graph.edges.tolist():
            fh.write(f"{u} {v}\n")
