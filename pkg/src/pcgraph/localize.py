"""Single-piece localization.

Every solver here looks for a connected node set ``C`` that makes
``||x - 1_C||^2`` small (unit magnitude), except :func:`localize_unknown`,
which also fits the magnitude.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .graph import (
    EmptyResultError,
    Graph,
    Piece,
    all_pairs_shortest_paths,
    as_signal,
    path_from_predecessors,
    project_to_piece,
)
from .maxflow import PairwiseNetwork, minimize_binary_energy

log = logging.getLogger(__name__)

DEFAULT_LAMBDAS = (0.0,) + tuple(0.01 * 2.0**k for k in range(13))

METHODS = ("hard", "cut", "path", "path_relax", "path_sp", "combined")


class QPNotConvergedError(RuntimeError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"QP did not converge after {iterations} iterations (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class LambdaGrid:
    """Regularization weights swept by the cut solver. Starts at 0, strictly increasing."""

    values: tuple[float, ...] = DEFAULT_LAMBDAS

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("lambda grid is empty")
        if vals[0] != 0.0:
            raise ValueError("lambda grid must start at 0")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def parse(cls, text: str) -> "LambdaGrid":
        return cls(tuple(float(v) for v in text.split(",") if v.strip()))

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class LocalizeResult:
    piece: Piece
    objective: float  # ||x - mu 1_C||^2
    method: str
    lambda_used: float | None = None
    # for "combined"/"path", the sub-solver whose piece was kept
    source: str | None = None
    # objective after each accepted alternating step (unknown magnitude only)
    history: tuple[float, ...] = field(default=(), compare=False)

    @property
    def nodes(self) -> tuple[int, ...]:
        return self.piece.nodes

    @property
    def magnitude(self) -> float:
        return self.piece.magnitude


def unit_objective(x: np.ndarray, nodes) -> float:
    r = x.copy()
    r[list(nodes)] -= 1.0
    return float(r @ r)


def magnitude_step(x: np.ndarray, nodes) -> float:
    """Least-squares magnitude for a fixed support: the mean of ``x`` over it."""
    idx = np.fromiter(nodes, dtype=np.int64)
    return float(x[idx].sum() / len(idx))


def _cut_network(graph: Graph) -> PairwiseNetwork:
    net = graph.__dict__.get("_cut_network")
    if net is None:
        net = PairwiseNetwork(graph.n, graph.edges)
        # Graph is frozen; cache alongside its cached_property values
        graph.__dict__["_cut_network"] = net
    return net


def hard_threshold_localize(graph: Graph, x) -> LocalizeResult:
    x = as_signal(graph, x)
    piece = project_to_piece(graph, x > 0.5)
    if piece is None:
        raise EmptyResultError("no node exceeds 1/2")
    return LocalizeResult(piece, unit_objective(x, piece.nodes), "hard", 0.0)


def cut_labeling(graph: Graph, x, lam: float) -> tuple[np.ndarray, float]:
    """Exact minimizer of ``||x - t||^2 + lam * ||Delta t||_0`` over binary ``t``.

    Returns the labeling and its energy.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = np.asarray(x, dtype=float)
    return minimize_binary_energy(x**2, (x - 1.0) ** 2, graph.edges, lam, network=_cut_network(graph))


def cut_localize_fixed(graph: Graph, x, lam: float) -> tuple[np.ndarray, LocalizeResult]:
    x = as_signal(graph, x)
    t, _ = cut_labeling(graph, x, lam)
    piece = project_to_piece(graph, t.astype(bool))
    if piece is None:
        raise EmptyResultError(f"cut solver activated nothing at lambda={lam}")
    return t, LocalizeResult(piece, unit_objective(x, piece.nodes), "cut", float(lam))


def cut_localize(graph: Graph, x, grid: LambdaGrid | None = None) -> LocalizeResult:
    x = as_signal(graph, x)
    grid = grid or LambdaGrid()
    best = None
    for lam in grid:
        try:
            _, res = cut_localize_fixed(graph, x, lam)
        except EmptyResultError:
            continue
        if best is None or res.objective < best.objective:
            best = res
    if best is None:
        raise EmptyResultError("cut solver activated nothing for every lambda")
    return best


def degree_relaxation(graph: Graph, x, tol: float = 1e-6, max_iter: int = 10_000) -> np.ndarray:
    """Solve ``min ||x - t||^2`` s.t. ``A t <= 2``, ``0 <= t <= 1``.

    Accelerated projected gradient ascent on the dual with multipliers
    ``nu >= 0`` for ``A t <= 2``; the primal point is
    ``t(nu) = clip(x - A nu / 2, 0, 1)``. Stops once the KKT residual,
    ``max(max(A t - 2, 0), max |nu * (A t - 2)|)``, is at most ``tol``.
    Adaptive restart keeps the momentum from oscillating.
    """
    x = as_signal(graph, x)
    if graph.m == 0:
        return np.clip(x, 0.0, 1.0)
    A = graph.adjacency
    # ||A||_2 <= max degree; the dual gradient is ||A||^2 / 2 Lipschitz
    step = 2.0 / float(graph.degree.max()) ** 2
    nu = np.zeros(graph.n)
    w = nu.copy()
    theta = 1.0
    residual = np.inf
    for k in range(1, max_iter + 1):
        tw = np.clip(x - 0.5 * (A @ w), 0.0, 1.0)
        nu_new = np.maximum(w + step * (A @ tw - 2.0), 0.0)
        if (nu_new - w) @ (nu_new - nu) < 0:
            theta = 1.0
            w = nu_new
        else:
            theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
            w = nu_new + ((theta - 1.0) / theta_new) * (nu_new - nu)
            theta = theta_new
        nu = nu_new
        if k % 10 == 0 or k == max_iter:
            t = np.clip(x - 0.5 * (A @ nu), 0.0, 1.0)
            slack = A @ t - 2.0
            residual = max(float(np.max(slack, initial=0.0)), float(np.max(np.abs(nu * slack))))
            if residual <= tol:
                return t
    raise QPNotConvergedError(residual, max_iter)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        p = self.parent
        while p[i] != i:
            p[i] = p[p[i]]
            i = p[i]
        return i


def _threshold_sweep(graph: Graph, x: np.ndarray, scores: np.ndarray) -> tuple[float, Piece]:
    """Best ``Pj({i : scores_i >= thr})`` over the distinct values of ``scores``.

    Nodes are switched on in decreasing score order; a union-find tracks
    each component's size, smallest node and ``sum(1 - 2 x_i)``, so the
    unit objective of the largest component is ``||x||^2`` plus that sum.
    Ties in objective go to the smaller threshold.
    """
    order = np.argsort(-scores, kind="stable").tolist()
    vals = scores.tolist()
    gain_of = (1.0 - 2.0 * x).tolist()
    base = float(x @ x)
    uf = _UnionFind(graph.n)
    on = [False] * graph.n
    size = [0] * graph.n
    minid = [0] * graph.n
    gain = [0.0] * graph.n
    nbrs = graph._neighbors
    best_root = -1
    best_obj = np.inf
    best_thr = None

    def better(r, b):
        return size[r] > size[b] or (size[r] == size[b] and minid[r] < minid[b])

    i = 0
    while i < len(order):
        thr = vals[order[i]]
        while i < len(order) and vals[order[i]] == thr:
            v = order[i]
            i += 1
            on[v] = True
            size[v], minid[v], gain[v] = 1, v, gain_of[v]
            r = v
            for w_ in nbrs[v]:
                if not on[w_]:
                    continue
                rw = uf.find(w_)
                if rw == r:
                    continue
                if size[rw] < size[r]:
                    r, rw = rw, r
                uf.parent[r] = rw
                size[rw] += size[r]
                minid[rw] = min(minid[rw], minid[r])
                gain[rw] += gain[r]
                r = rw
            if best_root < 0 or uf.find(best_root) == r or better(r, uf.find(best_root)):
                best_root = r
        obj = base + gain[uf.find(best_root)]
        if obj <= best_obj:
            best_obj, best_thr = obj, thr
    piece = project_to_piece(graph, scores >= best_thr)
    return best_thr, piece


def path_relax_localize(graph: Graph, x, tol: float = 1e-6, max_iter: int = 10_000) -> LocalizeResult:
    x = as_signal(graph, x)
    t = degree_relaxation(graph, x, tol=tol, max_iter=max_iter)
    thr, piece = _threshold_sweep(graph, x, t)
    if piece is None:
        raise EmptyResultError("threshold sweep produced no piece")
    return LocalizeResult(piece, unit_objective(x, piece.nodes), "path_relax", float(thr))


def path_sp_localize(graph: Graph, x) -> LocalizeResult:
    """Best simple path for ``||x - 1_C||^2 + lam |C|`` with ``lam = 2 max(x) - 1``.

    With ``y = max(x) - x >= 0`` and edge weights ``(y_i + y_j) / 2`` the
    regularized objective of a path from ``s`` to ``t`` is
    ``x'x + 2 (pathweight(s, t) + (y_s + y_t) / 2)``, so all-sources
    Dijkstra finds the optimum. Single-node paths are not candidates; ties
    go to the lexicographically smallest ``(s, t)``. The reported objective
    is the unregularized one.
    """
    x = as_signal(graph, x)
    if graph.m == 0:
        raise EmptyResultError("graph has no edges, so it has no paths")
    xmax = float(x.max())
    lam = 2.0 * xmax - 1.0
    y = xmax - x
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    dist, pred = all_pairs_shortest_paths(graph, 0.5 * (y[u] + y[v]))
    score = dist + 0.5 * (y[:, None] + y[None, :])
    score[np.tril_indices(graph.n)] = np.inf
    flat = int(np.argmin(score))
    s, t = divmod(flat, graph.n)
    if not np.isfinite(score[s, t]):
        raise EmptyResultError("no pair of connected nodes")
    piece = Piece(tuple(path_from_predecessors(pred[s], s, t)))
    return LocalizeResult(piece, unit_objective(x, piece.nodes), "path_sp", lam)


def path_localize(graph: Graph, x) -> LocalizeResult:
    """Better of the relaxation and shortest-path solvers.

    With no entry above 1/2 every node costs at least as much inside a piece
    as outside it, so the empty support is optimal and nothing is returned.
    """
    x = as_signal(graph, x)
    if not np.any(x > 0.5):
        raise EmptyResultError("no entry above 1/2, so no path improves on the empty support")
    candidates = []
    for solver in (path_relax_localize, path_sp_localize):
        try:
            candidates.append(solver(graph, x))
        except (EmptyResultError, QPNotConvergedError) as exc:
            log.debug("%s failed: %s", solver.__name__, exc)
    if not candidates:
        raise EmptyResultError("both path solvers failed")
    best = min(candidates, key=lambda r: r.objective)
    return LocalizeResult(best.piece, best.objective, "path", best.lambda_used, source=best.method)


def combine(cut: LocalizeResult | None, path: LocalizeResult | None) -> LocalizeResult:
    """Pick the branch with the smaller objective; the cut branch wins ties."""
    candidates = [r for r in (cut, path) if r is not None]
    if not candidates:
        raise EmptyResultError("neither cut nor path solver found a piece")
    best = min(candidates, key=lambda r: r.objective)
    return LocalizeResult(
        best.piece, best.objective, "combined", best.lambda_used, source=best.source or best.method
    )


def localize_unit(graph: Graph, x, grid: LambdaGrid | None = None) -> LocalizeResult:
    """Unit-magnitude localization: the better of the cut and path solvers."""
    x = as_signal(graph, x)
    return combine(_try(cut_localize, graph, x, grid), _try(path_localize, graph, x))


def _try(solver, *args):
    try:
        return solver(*args)
    except EmptyResultError as exc:
        log.debug("%s failed: %s", solver.__name__, exc)
        return None


def get_localizer(method: str, grid: LambdaGrid | None = None) -> Callable[[Graph, np.ndarray], LocalizeResult]:
    if method == "hard":
        return hard_threshold_localize
    if method == "cut":
        return lambda g, x: cut_localize(g, x, grid)
    if method == "path":
        return path_localize
    if method == "path_relax":
        return path_relax_localize
    if method == "path_sp":
        return path_sp_localize
    if method == "combined":
        return lambda g, x: localize_unit(g, x, grid)
    raise ValueError(f"unknown localization method {method!r}; expected one of {METHODS}")


def localize_unknown(
    graph: Graph,
    x,
    grid: LambdaGrid | None = None,
    method: str = "combined",
    max_iter: int = 20,
) -> tuple[float, LocalizeResult]:
    """Localize a piece of unknown magnitude by alternating ``mu`` and ``C``.

    Starts from ``mu = max(x)``. Each round sets ``C`` to the unit-magnitude
    localization of ``x / mu`` and then ``mu`` to the mean of ``x`` over
    ``C``. Stops when ``C`` repeats, the objective would increase, ``mu``
    is no longer positive, or after ``max_iter`` rounds.
    """
    x = as_signal(graph, x)
    loc1 = get_localizer(method, grid)
    mu0 = float(x.max())
    if mu0 <= 0:
        raise EmptyResultError("signal has no positive entry to start from")
    try:
        res = loc1(graph, x / mu0)
    except (EmptyResultError, QPNotConvergedError) as exc:
        raise EmptyResultError(f"initial localization failed: {exc}") from exc

    nodes = res.piece.nodes
    mu = magnitude_step(x, nodes)
    if mu <= 0:
        raise EmptyResultError("initial piece has nonpositive mean")
    obj = _objective(x, nodes, mu)
    history = [obj]
    for _ in range(max_iter):
        try:
            new = loc1(graph, x / mu)
        except (EmptyResultError, QPNotConvergedError) as exc:
            log.debug("alternating step failed, keeping last state: %s", exc)
            break
        if new.piece.nodes == nodes:
            break
        new_mu = magnitude_step(x, new.piece.nodes)
        if new_mu <= 0:
            break
        new_obj = _objective(x, new.piece.nodes, new_mu)
        if new_obj > obj:
            break
        res, nodes, mu, obj = new, new.piece.nodes, new_mu, new_obj
        history.append(obj)
    out = LocalizeResult(
        Piece(nodes, mu), obj, res.method, res.lambda_used, source=res.source or res.method, history=tuple(history)
    )
    return mu, out


def _objective(x: np.ndarray, nodes: Sequence[int], mu: float) -> float:
    r = x.copy()
    r[list(nodes)] -= mu
    return float(r @ r)
