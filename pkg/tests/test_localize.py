import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from oracles import brute_force_binary_energy, random_graph_edges, simple_paths
from pcgraph import synth
from pcgraph.graph import EmptyResultError, Graph, Piece
from pcgraph.localize import (
    DEFAULT_LAMBDAS,
    LambdaGrid,
    LocalizeResult,
    combine,
    cut_labeling,
    cut_localize,
    cut_localize_fixed,
    degree_relaxation,
    get_localizer,
    hard_threshold_localize,
    localize_unit,
    localize_unknown,
    magnitude_step,
    path_localize,
    path_relax_localize,
    path_sp_localize,
    unit_objective,
)


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


# a small graph where the relaxation's best threshold is a blob and the
# shortest-path solver finds a cheaper piece (found by search, then frozen)
BLOB_EDGES = [(0, 2), (0, 3), (0, 4), (0, 5), (1, 5), (2, 4), (2, 6), (3, 4), (3, 5), (3, 6), (4, 6)]
BLOB_X = np.array([-0.2, 0.3, 1.2, 1.2, 0.4, 0.4, 0.0])


def test_lambda_grid():
    assert DEFAULT_LAMBDAS[0] == 0.0 and len(DEFAULT_LAMBDAS) == 14
    assert DEFAULT_LAMBDAS[-1] == pytest.approx(0.01 * 2**12)
    assert LambdaGrid.parse("0, 0.5,1").values == (0.0, 0.5, 1.0)
    for bad in ["0.1,0.2", "0,1,1", "", "0,-1"]:
        with pytest.raises(ValueError):
            LambdaGrid.parse(bad)


# hard threshold


def test_hard_threshold_noiseless():
    g = path_graph(6)
    x = Piece((1, 2, 3)).signal(6)
    res = hard_threshold_localize(g, x)
    assert res.nodes == (1, 2, 3) and res.objective == 0.0


def test_hard_threshold_tie_example():
    res = hard_threshold_localize(path_graph(3), [0.6, 0.4, 0.7])
    assert res.nodes == (0,)
    assert res.objective == pytest.approx(0.4**2 + 0.4**2 + 0.7**2, abs=1e-15)


def test_hard_threshold_empty():
    with pytest.raises(EmptyResultError):
        hard_threshold_localize(path_graph(3), [0.1, 0.5, 0.2])


def test_threshold_is_strict():
    # x_i = 1/2 exactly is not activated
    res = hard_threshold_localize(path_graph(3), [0.5, 0.9, 0.5])
    assert res.nodes == (1,)
    t, _ = cut_labeling(path_graph(3), np.array([0.5, 0.9, 0.5]), 0.0)
    assert t.tolist() == [0, 1, 0]


# cut solver


def test_cut_lambda_zero_is_threshold():
    rng = np.random.default_rng(3)
    g = Graph.from_edges(10, random_graph_edges(rng, 10, 0.3))
    x = rng.uniform(-1, 2, 10)
    t, _ = cut_labeling(g, x, 0.0)
    assert t.tolist() == (x > 0.5).astype(int).tolist()


def test_cut_star_center_pulled_up():
    g = star_graph(6)
    x = np.array([0.45] + [0.9] * 6)
    best, arg = brute_force_binary_energy(x**2, (x - 1) ** 2, g.edges.tolist(), 0.2)
    assert arg[0] == 1
    t, res = cut_localize_fixed(g, x, 0.2)
    assert t.tolist() == arg.tolist()
    assert res.nodes == tuple(range(7))


def test_cut_zero_signal():
    g = star_graph(4)
    for lam in (0.0, 0.3, 5.0):
        t, _ = cut_labeling(g, np.zeros(5), lam)
        assert not t.any()
        with pytest.raises(EmptyResultError):
            cut_localize_fixed(g, np.zeros(5), lam)
    with pytest.raises(EmptyResultError):
        cut_localize(g, np.zeros(5))


def test_cut_grid_zero_equals_hard_threshold():
    rng = np.random.default_rng(11)
    for _ in range(30):
        n = int(rng.integers(3, 15))
        g = Graph.from_edges(n, random_graph_edges(rng, n, 0.3))
        x = rng.uniform(-0.5, 1.5, n)
        if not (x > 0.5).any():
            continue
        a = cut_localize(g, x, LambdaGrid((0.0,)))
        b = hard_threshold_localize(g, x)
        assert a.nodes == b.nodes and a.objective == b.objective


def test_cut_noiseless_ball():
    g = synth.gen_geometric_graph(300, 0.1, 1)
    piece = synth.gen_ball_piece(g, 17, 2)
    res = cut_localize(g, piece.signal(g.n))
    assert res.nodes == piece.nodes and res.objective == 0.0


@pytest.mark.parametrize("seed", range(25))
def test_cut_never_worse_than_threshold(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 11))
    g = Graph.from_edges(n, random_graph_edges(rng, n, 0.4))
    x = rng.uniform(-1, 2, n)
    try:
        hard = hard_threshold_localize(g, x)
    except EmptyResultError:
        return
    assert cut_localize(g, x).objective <= hard.objective
    assert localize_unit(g, x).objective <= hard.objective


def test_cut_picks_smallest_lambda_on_ties():
    g = path_graph(4)
    res = cut_localize(g, Piece((1, 2)).signal(4))
    assert res.lambda_used == 0.0


# degree-constrained relaxation


def qp_oracle(graph, x):
    A = graph.adjacency.toarray()
    cons = {"type": "ineq", "fun": lambda t: 2 - A @ t, "jac": lambda t: -A}
    r = minimize(
        lambda t: np.sum((x - t) ** 2),
        np.clip(x, 0, 1) * 0.5,
        jac=lambda t: 2 * (t - x),
        bounds=[(0, 1)] * len(x),
        constraints=[cons],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    return r.x


def test_relaxation_isolated_node():
    g = Graph.from_edges(1, [])
    np.testing.assert_allclose(degree_relaxation(g, np.array([0.9])), [0.9])
    assert path_relax_localize(g, [0.9]).nodes == (0,)


def test_relaxation_hub_matches_qp_oracle():
    g = Graph.from_edges(6, [(0, 1), (0, 2), (0, 3), (0, 4), (4, 5)])
    x = np.array([1.0, 1, 1, 1, 1, 0])
    t = degree_relaxation(g, x)
    np.testing.assert_allclose(t, qp_oracle(g, x), atol=1e-5)
    # the hub's four activated neighbors share the budget of 2
    assert t[1:5].sum() == pytest.approx(2.0, abs=1e-5)
    assert t[1] < 0.6


@pytest.mark.parametrize("seed", range(10))
def test_relaxation_random_matches_qp_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    n = 8
    g = Graph.from_edges(n, random_graph_edges(rng, n, 0.5))
    x = rng.uniform(-0.5, 1.5, n)
    t = degree_relaxation(g, x)
    assert np.all(t >= -1e-12) and np.all(t <= 1 + 1e-12)
    assert np.all(g.adjacency @ t <= 2 + 1e-5)
    np.testing.assert_allclose(t, qp_oracle(g, x), atol=1e-5)


def test_relaxation_noiseless_path_graph():
    g = path_graph(12)
    piece = Piece(tuple(range(3, 9)))
    x = piece.signal(12)
    np.testing.assert_allclose(degree_relaxation(g, x), x, atol=1e-9)
    res = path_relax_localize(g, x)
    assert res.nodes == piece.nodes and res.objective == 0.0


# shortest-path solver


def test_sp_no_edges():
    with pytest.raises(EmptyResultError):
        path_sp_localize(Graph.from_edges(3, []), [1.0, 0, 0])


def test_sp_path_weight_identity():
    rng = np.random.default_rng(5)
    g = Graph.from_edges(8, random_graph_edges(rng, 8, 0.5))
    x = rng.normal(size=8)
    y = x.max() - x
    assert y.min() == 0.0 and y[np.argmax(x)] == 0.0
    w = {}
    for u, v in g.edges.tolist():
        w[(u, v)] = w[(v, u)] = (y[u] + y[v]) / 2
    for p in simple_paths(8, g.edges.tolist())[:200]:
        lhs = sum(w[(a, b)] for a, b in zip(p, p[1:]))
        rhs = y[list(p)].sum() - (y[p[0]] + y[p[-1]]) / 2
        assert lhs == pytest.approx(rhs, abs=1e-12)


def sp_oracle(graph, x):
    lam = 2 * x.max() - 1
    best = np.inf
    for p in simple_paths(graph.n, graph.edges.tolist()):
        best = min(best, unit_objective(x, p) + lam * len(p))
    return best, lam


@pytest.mark.parametrize("seed", range(20))
def test_sp_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    g = Graph.from_edges(8, random_graph_edges(rng, 8, 0.35))
    if g.m == 0:
        return
    x = rng.uniform(-1, 2, 8)
    res = path_sp_localize(g, x)
    best, lam = sp_oracle(g, x)
    assert res.lambda_used == pytest.approx(lam)
    assert res.objective + lam * len(res.nodes) == pytest.approx(best, abs=1e-9)
    assert g.is_connected_set(res.nodes) and len(res.nodes) >= 2
    assert res.objective == pytest.approx(unit_objective(x, res.nodes), abs=1e-12)


def test_path_localize_prefers_cheaper_branch():
    g = Graph.from_edges(7, BLOB_EDGES)
    relax = path_relax_localize(g, BLOB_X)
    sp = path_sp_localize(g, BLOB_X)
    assert sp.objective < relax.objective
    res = path_localize(g, BLOB_X)
    assert res.source == "path_sp" and res.nodes == sp.nodes
    assert res.objective == sp.objective


@pytest.mark.parametrize("seed", range(10))
def test_path_localize_is_min_of_branches(seed):
    rng = np.random.default_rng(seed)
    g = Graph.from_edges(10, random_graph_edges(rng, 10, 0.3))
    if g.m == 0:
        return
    x = rng.uniform(-0.5, 1.5, 10)
    res = path_localize(g, x)
    objs = []
    for f in (path_relax_localize, path_sp_localize):
        try:
            objs.append(f(g, x).objective)
        except EmptyResultError:
            pass
    assert res.objective == min(objs)


def test_path_localize_noiseless_long_path():
    g = synth.gen_geometric_graph(500, 0.08, 2)
    piece = synth.random_path_piece(g, 15, np.random.default_rng(0))
    res = path_localize(g, piece.signal(g.n))
    assert res.objective == 0.0 and res.nodes == piece.nodes


# combined


def test_combined_noiseless_ball_cut_wins():
    g = synth.gen_geometric_graph(300, 0.1, 4)
    piece = synth.gen_ball_piece(g, 50, 2)
    res = localize_unit(g, piece.signal(g.n))
    assert res.source == "cut" and res.objective == 0.0 and res.nodes == piece.nodes


def test_combined_noiseless_path_ties_go_to_cut():
    # without noise both branches reach objective 0, so the tie rule picks cut
    g = synth.gen_geometric_graph(800, 0.05, 0)
    piece = synth.random_path_piece(g, 40, np.random.default_rng(1))
    res = localize_unit(g, piece.signal(g.n))
    assert res.objective == 0.0 and res.nodes == piece.nodes and res.source == "cut"


def test_combined_path_wins_on_noisy_path():
    g = synth.gen_geometric_graph(800, 0.05, 0)
    wins = 0
    for s in range(10):
        rng = np.random.default_rng(s)
        piece = synth.random_path_piece(g, 40, rng)
        x = piece.signal(g.n) + 0.5 * rng.standard_normal(g.n)
        wins += localize_unit(g, x).source in ("path_relax", "path_sp")
    assert wins >= 8


def test_path_branch_needs_an_entry_above_half():
    g = path_graph(5)
    x = np.array([0.5, 0.4, 0.5, -1.0, 0.2])
    with pytest.raises(EmptyResultError):
        path_localize(g, x)
    with pytest.raises(EmptyResultError):
        localize_unit(g, np.zeros(5))
    # the shortest-path solver alone still returns its best path
    assert len(path_sp_localize(g, x).nodes) >= 2


def test_combine_tie_and_none():
    a = LocalizeResult(Piece((0,)), 1.0, "cut")
    b = LocalizeResult(Piece((1,)), 1.0, "path")
    assert combine(a, b).source == "cut"
    assert combine(None, b).source == "path"
    with pytest.raises(EmptyResultError):
        combine(None, None)


def test_get_localizer_names():
    for m in ("hard", "cut", "path", "path_relax", "path_sp", "combined"):
        assert callable(get_localizer(m))
    with pytest.raises(ValueError):
        get_localizer("magic")


# unknown magnitude


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-10, 10), min_size=1, max_size=30),
    st.data(),
)
def test_magnitude_step_is_mean(xs, data):
    x = np.array(xs)
    nodes = data.draw(st.sets(st.integers(0, len(xs) - 1), min_size=1))
    assert abs(magnitude_step(x, nodes) - x[sorted(nodes)].mean()) <= 1e-12 * max(1, np.abs(x).max())


def test_unknown_magnitude_fixed_point():
    g = synth.gen_geometric_graph(200, 0.12, 3)
    piece = synth.gen_ball_piece(g, 9, 2)
    mu, res = localize_unknown(g, 3.7 * piece.signal(g.n))
    assert mu == pytest.approx(3.7, abs=1e-12) and res.nodes == piece.nodes
    assert res.history[-1] == res.objective


def test_unknown_magnitude_objective_non_increasing():
    g = synth.gen_geometric_graph(300, 0.1, 5)
    rng = np.random.default_rng(0)
    for _ in range(5):
        piece = synth.random_ball_piece(g, 2, rng)
        x = 1.8 * piece.signal(g.n) + 0.4 * rng.standard_normal(g.n)
        mu, res = localize_unknown(g, x)
        objs = res.history
        assert all(b <= a + 1e-12 for a, b in zip(objs, objs[1:]))
        assert mu == pytest.approx(x[list(res.nodes)].mean(), abs=1e-12)


def test_unknown_magnitude_errors():
    g = path_graph(4)
    with pytest.raises(EmptyResultError):
        localize_unknown(g, np.full(4, -1.0))
    with pytest.raises(EmptyResultError):
        localize_unknown(g, np.zeros(4))


def test_unknown_magnitude_grid_recovery():
    g = synth.grid_graph(20, 20)
    center = 10 * 20 + 10
    piece = synth.gen_ball_piece(g, center, 3)
    scores = []
    for s in range(50):
        rng = np.random.default_rng(s)
        x = 2.0 * piece.signal(g.n) + 0.1 * rng.standard_normal(g.n)
        _, res = localize_unknown(g, x, method="cut")
        common = len(set(res.nodes) & set(piece.nodes))
        scores.append(2 * common / (len(res.nodes) + len(piece.nodes)))
    assert np.median(scores) >= 0.9
