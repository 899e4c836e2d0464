"""Localization, decomposition and dictionary learning of piecewise-constant graph signals."""

from .baselines import glap_denoise, glap_localize
from .decompose import Decomposition, decompose
from .dictlearn import (
    AtomUsage,
    CoefficientMatrix,
    PieceDictionary,
    atom_usage,
    learn_dictionary,
    omp_sparse_code,
    update_atom,
)
from .graph import (
    EmptyResultError,
    Graph,
    Piece,
    connected_components,
    cut_count,
    project_to_piece,
    read_edge_list,
    shortest_paths_from,
    write_edge_list,
)
from .localize import (
    LambdaGrid,
    LocalizeResult,
    QPNotConvergedError,
    cut_localize,
    cut_localize_fixed,
    hard_threshold_localize,
    localize_unit,
    localize_unknown,
    path_localize,
    path_relax_localize,
    path_sp_localize,
)
from .maxflow import min_st_cut
from .metrics import f1, hamming, nmse

__version__ = "0.1.0"
