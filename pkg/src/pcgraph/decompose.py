"""Piecewise-constant decomposition of one signal into K pieces."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .graph import EmptyResultError, Graph, Piece, as_signal
from .localize import LambdaGrid, QPNotConvergedError, localize_unknown

log = logging.getLogger(__name__)

DEAD_MAGNITUDE = 1e-8


@dataclass
class Decomposition:
    pieces: list[Piece]
    objective_trace: list[float] = field(default_factory=list)
    residual: np.ndarray | None = None

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def model(self, n: int) -> np.ndarray:
        return model_signal(n, self.pieces)


def model_signal(n: int, pieces) -> np.ndarray:
    out = np.zeros(n)
    for p in pieces:
        out[list(p.nodes)] += p.magnitude
    return out


def decompose(
    graph: Graph,
    x,
    K: int,
    grid: LambdaGrid | None = None,
    max_sweeps: int = 50,
    tol: float = 1e-6,
    method: str = "combined",
) -> Decomposition:
    """Fit ``x ~ sum_i mu_i 1_{C_i}`` by cyclic coordinate descent over pieces.

    Pieces are first peeled greedily off the running residual. Each sweep
    then refits piece ``i`` with :func:`localize_unknown` on
    ``x - sum_{j != i} mu_j 1_{C_j}`` and keeps the refit only if the total
    objective does not go up. Stops when a sweep improves the objective by
    less than ``tol`` (relative) or after ``max_sweeps`` sweeps. Pieces may
    overlap.
    """
    x = as_signal(graph, x)
    if K < 1:
        raise ValueError("K must be at least 1")
    n = graph.n

    pieces: list[Piece] = []
    residual = x
    for i in range(K):
        pieces.append(_fit(graph, residual, grid, method, fallback=Piece((int(np.argmax(residual)),), 0.0)))
        residual = x - model_signal(n, pieces)
    obj = float(residual @ residual)
    trace = [obj]

    for sweep in range(max_sweeps):
        start = obj
        for i in range(K):
            others = pieces[:i] + pieces[i + 1 :]
            if abs(pieces[i].magnitude) < DEAD_MAGNITUDE:
                log.debug("piece %d has zero magnitude, refitting it from the residual", i)
            target = x - model_signal(n, others)
            cand = _fit(graph, target, grid, method)
            if cand is None:
                continue
            new_resid = target - model_signal(n, [cand])
            new_obj = float(new_resid @ new_resid)
            if new_obj <= obj:
                pieces[i] = cand
                obj = new_obj
                trace.append(obj)
        if start - obj <= tol * start:
            break
    return Decomposition(pieces, trace, x - model_signal(n, pieces))


def _fit(graph, target, grid, method, fallback=None):
    try:
        _, res = localize_unknown(graph, target, grid, method=method)
    except (EmptyResultError, QPNotConvergedError) as exc:
        log.info("localization step failed, piece left unchanged: %s", exc)
        return fallback
    return res.piece
