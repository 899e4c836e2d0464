"""Graph Laplacian denoising baseline, gLap(lambda)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .graph import EmptyResultError, Graph, as_signal, project_to_piece
from .localize import LocalizeResult, unit_objective


class SolveError(RuntimeError):
    def __init__(self, residual: float):
        super().__init__(f"linear solve did not reach tolerance (relative residual {residual:.3e})")
        self.residual = residual


def laplacian_quadratic(graph: Graph, t) -> float:
    """``t' L t``, i.e. the sum of squared differences across edges."""
    t = np.asarray(t, dtype=float)
    d = t[graph.edges[:, 0]] - t[graph.edges[:, 1]]
    return float(d @ d)


def glap_denoise(graph: Graph, x, lam: float, tol: float = 1e-8) -> np.ndarray:
    """Minimizer of ``||x - t||^2 + lam t' L t``, i.e. ``(I + lam L)^{-1} x``.

    Solved by conjugate gradients well below ``tol``; raises
    :class:`SolveError` if ``||(I + lam L) t - x|| > tol ||x||``.
    """
    x = as_signal(graph, x)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0 or graph.m == 0 or not np.any(x):
        return x.copy()
    M = (sp.identity(graph.n, format="csr") + lam * graph.laplacian).tocsr()
    t, _ = cg(M, x, rtol=1e-13, atol=0.0, maxiter=20 * graph.n)
    res = float(np.linalg.norm(M @ t - x) / np.linalg.norm(x))
    if res > tol:
        raise SolveError(res)
    return t


def glap_localize(graph: Graph, x, lam: float) -> LocalizeResult:
    """gLap denoising followed by hard thresholding at 1/2 and projection."""
    x = as_signal(graph, x)
    t = glap_denoise(graph, x, lam)
    piece = project_to_piece(graph, t > 0.5)
    if piece is None:
        raise EmptyResultError(f"gLap({lam}) output has no entry above 1/2")
    return LocalizeResult(piece, unit_objective(x, piece.nodes), "glap", float(lam))
