import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcgraph.metrics import evaluate, f1, hamming, nmse

node_sets = st.frozensets(st.integers(0, 40), max_size=25)


def test_hamming_examples():
    assert hamming({1, 2, 3}, {1, 2, 3}) == 0
    assert hamming({1, 2}, {5, 6, 7}) == 5
    assert hamming({1, 2}, {2, 3}) == 2


def test_f1_examples():
    assert f1({1, 2, 3}, {1, 2, 3}) == 1.0
    assert f1({1, 2}, {3, 4}) == 0.0
    assert f1(range(5, 15), range(10)) == 0.5
    assert f1(set(), {1}) == 0.0
    with pytest.raises(ValueError):
        f1({1}, set())


def test_nmse_examples():
    x = np.array([1.0, -2.0, 3.0])
    assert nmse(x, x) == 0.0
    assert nmse(np.zeros(3), x) == 1.0
    assert nmse(2 * x, x) == 1.0
    with pytest.raises(ValueError):
        nmse(x, np.zeros(3))


def test_evaluate():
    r = evaluate({1, 2}, {2, 3}, np.ones(2), np.ones(2))
    assert (r.f1, r.hamming, r.nmse) == (0.5, 2, 0.0)


@settings(max_examples=2000, deadline=None)
@given(node_sets, node_sets, node_sets)
def test_hamming_is_a_metric(a, b, c):
    assert hamming(a, b) >= 0
    assert (hamming(a, b) == 0) == (a == b)
    assert hamming(a, b) == hamming(b, a)
    assert hamming(a, c) <= hamming(a, b) + hamming(b, c)


@settings(max_examples=2000, deadline=None)
@given(node_sets, node_sets.filter(bool))
def test_f1_range_and_duality(c_hat, c):
    v = f1(c_hat, c)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (hamming(c_hat, c) == 0)
    assert v == pytest.approx(1 - hamming(c_hat, c) / (len(c) + len(c_hat)))
