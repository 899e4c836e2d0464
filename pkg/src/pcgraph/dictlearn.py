"""Learning a dictionary of connected pieces shared by many graph signals.

The model is ``X ~ D Z`` with ``D = [1_{C_1} ... 1_{C_K}]`` and at most
``S`` nonzeros per column of ``Z``. Learning alternates OMP sparse coding
with atom-by-atom updates, each of which reduces to unit-magnitude
localization of ``R_j z_j / (z_j' z_j)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .decompose import decompose
from .graph import EmptyResultError, Graph, Piece
from .localize import LambdaGrid, QPNotConvergedError, get_localizer

log = logging.getLogger(__name__)

RESIDUAL_EPS = 1e-9


@dataclass
class PieceDictionary:
    graph: Graph
    pieces: list[Piece]

    def __post_init__(self):
        self.pieces = [Piece(p.nodes) for p in self.pieces]

    @property
    def K(self) -> int:
        return len(self.pieces)

    def matrix(self) -> np.ndarray:
        D = np.zeros((self.graph.n, self.K))
        for k, p in enumerate(self.pieces):
            D[list(p.nodes), k] = 1.0
        return D

    def replace(self, j: int, piece: Piece) -> "PieceDictionary":
        pieces = list(self.pieces)
        pieces[j] = piece
        return PieceDictionary(self.graph, pieces)

    def to_json(self) -> dict:
        return {"K": self.K, "atoms": [{"nodes": list(p.nodes)} for p in self.pieces]}

    @classmethod
    def from_json(cls, graph: Graph, doc: dict) -> "PieceDictionary":
        atoms = [Piece(tuple(a["nodes"])).check(graph) for a in doc["atoms"]]
        if doc.get("K", len(atoms)) != len(atoms):
            raise ValueError("K does not match the number of atoms")
        return cls(graph, atoms)


@dataclass
class CoefficientMatrix:
    """``K x L`` coefficients with at most ``S`` nonzeros per column (held dense)."""

    values: np.ndarray
    S: int

    def __post_init__(self):
        nnz = np.count_nonzero(self.values, axis=0)
        if nnz.size and nnz.max() > self.S:
            raise ValueError(f"a column has {nnz.max()} nonzeros, sparsity bound is {self.S}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def to_json(self) -> dict:
        rows, cols = np.nonzero(self.values)
        order = np.lexsort((rows, cols))
        entries = [[int(rows[i]), int(cols[i]), float(self.values[rows[i], cols[i]])] for i in order]
        return {"entries": entries, "shape": list(self.values.shape), "S": self.S}

    @classmethod
    def from_json(cls, doc: dict) -> "CoefficientMatrix":
        Z = np.zeros(tuple(doc["shape"]))
        for r, c, v in doc["entries"]:
            Z[r, c] = v
        return cls(Z, int(doc["S"]))


def frobenius_objective(X: np.ndarray, D: PieceDictionary, Z) -> float:
    Zv = Z.values if isinstance(Z, CoefficientMatrix) else Z
    E = X - D.matrix() @ Zv
    return float(np.sum(E * E))


def omp_sparse_code(X: np.ndarray, D: PieceDictionary, S: int) -> CoefficientMatrix:
    """Orthogonal matching pursuit, column by column.

    Atoms are picked by absolute correlation with the residual using the
    normalized copies ``1_C / sqrt(|C|)``; coefficients are refit by least
    squares on the chosen (unnormalized) atoms. An atom whose addition makes
    the chosen set rank deficient is skipped for that column.
    """
    if S < 1:
        raise ValueError("sparsity S must be at least 1")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Dm = D.matrix()
    K = Dm.shape[1]
    Dn = Dm / np.sqrt(Dm.sum(axis=0))
    Z = np.zeros((K, X.shape[1]))
    for j in range(X.shape[1]):
        x = X[:, j]
        r = x
        chosen: list[int] = []
        blocked = np.zeros(K, dtype=bool)
        coef = np.zeros(0)
        while len(chosen) < S and np.linalg.norm(r) >= RESIDUAL_EPS:
            corr = np.abs(Dn.T @ r)
            corr[blocked] = -1.0
            k = int(np.argmax(corr))
            if corr[k] <= 0:
                break
            trial = chosen + [k]
            sub = Dm[:, trial]
            if np.linalg.matrix_rank(sub) < len(trial):
                log.debug("column %d: atom %d is dependent on %s, skipped", j, k, chosen)
                blocked[k] = True
                continue
            blocked[k] = True
            coef, *_ = np.linalg.lstsq(sub, x, rcond=None)
            chosen = trial
            r = x - sub @ coef
        Z[chosen, j] = coef
    return CoefficientMatrix(Z, S)


def update_atom(
    X: np.ndarray,
    Z: CoefficientMatrix,
    D: PieceDictionary,
    j: int,
    grid: LambdaGrid | None = None,
    method: str = "combined",
) -> Piece:
    """Refit atom ``j`` with ``Z`` frozen.

    Returns the new piece, or the old one if the refit would increase
    ``||X - D Z||_F^2``. An unused atom (zero row) is replaced by the
    localization of the worst-fit residual column.
    """
    Zv = Z.values
    Dm = D.matrix()
    z = Zv[j]
    zz = float(z @ z)
    loc1 = get_localizer(method, grid)
    old = D.pieces[j]
    if zz == 0:
        E = X - Dm @ Zv
        c = int(np.argmax(np.sum(E * E, axis=0)))
        try:
            return Piece(loc1(D.graph, E[:, c]).piece.nodes)
        except (EmptyResultError, QPNotConvergedError) as exc:
            log.info("could not replace unused atom %d: %s", j, exc)
            return old
    R = X - Dm @ Zv + np.outer(Dm[:, j], z)
    target = R @ z / zz
    try:
        new = Piece(loc1(D.graph, target).piece.nodes)
    except (EmptyResultError, QPNotConvergedError) as exc:
        log.info("atom %d update failed, keeping it: %s", j, exc)
        return old
    if _atom_objective(R, new, z) <= _atom_objective(R, old, z):
        return new
    return old


def _atom_objective(R: np.ndarray, piece: Piece, z: np.ndarray) -> float:
    E = R.copy()
    E[list(piece.nodes)] -= z
    return float(np.sum(E * E))


def reseed_duplicates(X, D: PieceDictionary, S: int, grid=None, method="combined") -> PieceDictionary:
    """Replace each atom that repeats an earlier one, as if it were unused.

    The dictionary without the repeats codes ``X``; every repeat then takes
    the localization of the worst-fit residual column not already used for
    a replacement.
    """
    seen: dict[tuple[int, ...], int] = {}
    dups = []
    for j, p in enumerate(D.pieces):
        if p.nodes in seen:
            dups.append(j)
        else:
            seen[p.nodes] = j
    if not dups:
        return D
    keep = [j for j in range(D.K) if j not in dups]
    sub = PieceDictionary(D.graph, [D.pieces[j] for j in keep])
    E = X - sub.matrix() @ omp_sparse_code(X, sub, min(S, sub.K)).values
    err = np.sum(E * E, axis=0)
    loc1 = get_localizer(method, grid)
    for j in dups:
        c = int(np.argmax(err))
        err[c] = -np.inf
        try:
            D = D.replace(j, Piece(loc1(D.graph, E[:, c]).piece.nodes))
        except (EmptyResultError, QPNotConvergedError) as exc:
            log.info("could not reseed duplicate atom %d: %s", j, exc)
    return D


def update_atoms(X, Z, D, grid=None, method="combined") -> PieceDictionary:
    """One full pass of :func:`update_atom` over all atoms, in order."""
    for j in range(D.K):
        D = D.replace(j, update_atom(X, Z, D, j, grid, method))
    return D


def learn_dictionary(
    graph: Graph,
    X,
    K: int,
    S: int,
    grid: LambdaGrid | None = None,
    outer_iters: int = 30,
    tol: float = 1e-5,
    seed: int = 0,
    method: str = "combined",
) -> tuple[PieceDictionary, CoefficientMatrix, list[float]]:
    """Alternate OMP coding and atom updates.

    Atoms start as one-piece decompositions of ``K`` columns drawn with the
    seeded generator; repeated atoms are reseeded before each coding step
    (:func:`reseed_duplicates`). The trace holds ``||X - D Z||_F^2`` after every
    half-step; learning stops after ``outer_iters`` rounds or when a round
    changes the objective by less than ``tol`` (relative).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != graph.n:
        raise ValueError(f"signal matrix has {X.shape[0]} rows, graph has {graph.n} nodes")
    if not np.all(np.isfinite(X)):
        raise ValueError("signal matrix contains non-finite values")
    if K < 1 or S < 1 or outer_iters < 1:
        raise ValueError("K, S and outer_iters must all be at least 1")
    if not np.any(X):
        raise ValueError("signal matrix is all zeros")

    rng = np.random.default_rng(seed)
    L = X.shape[1]
    cols = rng.choice(L, size=K, replace=K > L)
    atoms = [Piece(decompose(graph, X[:, c], 1, grid, method=method).pieces[0].nodes) for c in cols]
    D = PieceDictionary(graph, atoms)

    trace: list[float] = []
    prev = None
    Z = None
    for _ in range(outer_iters):
        D = reseed_duplicates(X, D, S, grid, method)
        Z = omp_sparse_code(X, D, S)
        trace.append(frobenius_objective(X, D, Z))
        D = update_atoms(X, Z, D, grid, method)
        obj = frobenius_objective(X, D, Z)
        trace.append(obj)
        if prev is not None and abs(prev - obj) <= tol * prev:
            break
        prev = obj
    return D, Z, trace


@dataclass
class AtomUsage:
    counts: np.ndarray
    columns: list[list[int]] = field(repr=False)

    def ranked(self) -> list[int]:
        """Atom indices by decreasing usage; ties by index."""
        return sorted(range(len(self.counts)), key=lambda k: (-self.counts[k], k))

    def common(self, top_k: int) -> list[int]:
        return self.ranked()[:top_k]

    def special(self, max_usage: int) -> list[int]:
        """Atoms used at least once but at most ``max_usage`` times."""
        return [k for k in self.ranked() if 0 < self.counts[k] <= max_usage]

    def report(self) -> list[dict]:
        return [{"atom": k, "usage": int(self.counts[k]), "columns": self.columns[k]} for k in self.ranked()]


def atom_usage(Z) -> AtomUsage:
    Zv = Z.values if isinstance(Z, CoefficientMatrix) else np.asarray(Z)
    nz = Zv != 0
    return AtomUsage(nz.sum(axis=1), [np.flatnonzero(row).tolist() for row in nz])
