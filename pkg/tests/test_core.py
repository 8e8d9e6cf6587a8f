import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otsr.core import (
    CostMatrix,
    TransportPlan,
    cost_grid2d,
    cost_lattice1d,
    entropy,
    entropy_grad,
    is_probvec,
    make_probvec,
)
from otsr.exceptions import NegativeEntry, NonFinite, ZeroMass

from oracles import all_triples, entropy_loop, grid_distance

DEMO_NU = (0.2, 0.15, 0, 0, 0, 0.1, 0.15, 0.2, 0.15, 0.1)

weights = st.lists(st.floats(0, 10, allow_nan=False), min_size=1, max_size=12).filter(
    lambda w: sum(w) > 1e-6
)


def test_make_probvec_examples():
    np.testing.assert_array_equal(make_probvec([2, 2]), [0.5, 0.5])
    np.testing.assert_array_equal(make_probvec([1, 0, 0]), [1, 0, 0])


def test_demo_measurement_is_renormalized():
    # the listed demo entries add up to 1.05
    assert math.isclose(sum(DEMO_NU), 1.05)
    p = make_probvec(DEMO_NU)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(p, np.array(DEMO_NU) / 1.05)
    assert math.isclose(p[:2].sum(), 1 / 3)


@pytest.mark.parametrize(
    "raw, exc, index",
    [([1, -1], NegativeEntry, 1), ([0, 0], ZeroMass, None), ([1, float("nan")], NonFinite, 1),
     ([float("inf"), 1], NonFinite, 0)],
)
def test_make_probvec_errors(raw, exc, index):
    with pytest.raises(exc) as info:
        make_probvec(raw)
    if index is not None:
        assert info.value.index == index


def test_make_probvec_result_is_read_only():
    p = make_probvec([1, 3])
    with pytest.raises(ValueError):
        p[0] = 0.5


@given(weights)
def test_make_probvec_invariants_and_idempotence(w):
    p = make_probvec(w)
    assert is_probvec(p)
    assert abs(p.sum() - 1) <= 1e-9
    q = make_probvec(p)
    np.testing.assert_array_equal(q, p)


def test_cost_grid2d_examples():
    np.testing.assert_array_equal(np.asarray(cost_grid2d(1)), [[0.0]])
    c = np.asarray(cost_grid2d(2, "L2"))
    assert c[0, 1] == 1 and c[0, 2] == 1 and c[0, 3] == pytest.approx(math.sqrt(2))
    assert np.asarray(cost_grid2d(32)).max() == pytest.approx(math.hypot(31, 31))
    assert np.asarray(cost_grid2d(32)).max() == pytest.approx(43.8406, abs=1e-4)


@pytest.mark.parametrize("metric", ["L1", "L2"])
@pytest.mark.parametrize("m", [2, 3, 4])
def test_cost_grid2d_matches_coordinates_and_is_metric(m, metric):
    c = np.asarray(cost_grid2d(m, metric))
    n = m * m
    for i in range(n):
        for j in range(n):
            assert c[i, j] == pytest.approx(grid_distance(m, i, j, metric), abs=1e-12)
    assert np.all(np.diag(c) == 0)
    np.testing.assert_array_equal(c, c.T)
    for i, j, k in all_triples(n):
        assert c[i, k] <= c[i, j] + c[j, k] + 1e-12


def test_cost_grid2d_metadata():
    c = cost_grid2d(3, "L1")
    assert isinstance(c, CostMatrix)
    assert c.geometry == "grid-2d" and c.m == 3 and c.metric == "L1" and c.n == 9
    with pytest.raises(ValueError):
        cost_grid2d(0)
    with pytest.raises(ValueError):
        cost_grid2d(2, "Linf")


def test_cost_lattice1d_examples():
    np.testing.assert_array_equal(np.asarray(cost_lattice1d(2)), [[0, 1], [1, 0]])
    assert np.asarray(cost_lattice1d(3))[0, 2] == 2
    assert np.asarray(cost_lattice1d(10)).max() == 9
    assert np.asarray(cost_lattice1d(10, 2))[0, 7] == 49


@pytest.mark.parametrize("n", range(1, 11))
def test_cost_lattice1d_is_metric(n):
    c = np.asarray(cost_lattice1d(n))
    assert np.all(np.diag(c) == 0)
    np.testing.assert_array_equal(c, c.T)
    for i, j, k in all_triples(n):
        assert c[i, k] <= c[i, j] + c[j, k]


def test_entropy_examples():
    assert entropy(np.full(4, 0.25)) == pytest.approx(math.log(4), abs=1e-12)
    assert entropy([1.0, 0, 0]) == 0
    assert entropy([0.5, 0.5, 0, 0]) == pytest.approx(0.693147, abs=1e-6)


@given(weights)
def test_entropy_bounds_and_oracle(w):
    p = make_probvec(w)
    h = entropy(p)
    assert -1e-12 <= h <= math.log(p.size) + 1e-12
    assert h == pytest.approx(entropy_loop(p), abs=1e-12)
    if np.count_nonzero(p) == 1:
        assert h == 0


def test_entropy_extremes():
    assert entropy(np.full(7, 1 / 7)) == pytest.approx(math.log(7), abs=1e-12)
    assert entropy(np.eye(5)[2]) == 0


def test_entropy_grad_examples():
    np.testing.assert_allclose(entropy_grad(np.full(4, 0.25)), 0.386294, atol=1e-6)
    np.testing.assert_array_equal(entropy_grad([1.0, 0.0]), [-1.0, 0.0])
    np.testing.assert_allclose(entropy_grad([0.3, 0.7]), [0.20397, -0.64333], atol=1e-5)


@settings(max_examples=50)
@given(st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=8))
def test_entropy_grad_matches_central_differences(raw):
    p = np.array(raw)
    h = 1e-6
    g = entropy_grad(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        # entropy as a function on the positive orthant, not the simplex
        f = lambda x: -np.sum(x * np.log(x))
        fd = (f(p + e) - f(p - e)) / (2 * h)
        assert abs(fd - g[i]) <= 1e-5 * max(1.0, abs(g[i]))


def test_transport_plan_marginal_error():
    plan = TransportPlan(np.array([[0.5, 0.0], [0.0, 0.5]]), make_probvec([1, 1]), make_probvec([1, 1]))
    assert plan.marginal_error() == 0
