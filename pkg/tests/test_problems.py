import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kkt_indicator.problems import DEFAULT_K, REGISTRY, DTLZ2, get_problem, jacobian_fd

from oracles import central_difference_gradient

NAMES = sorted(REGISTRY)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_registry_defaults():
    assert get_problem("dtlz1", 3).k == 5
    for name in NAMES[1:]:
        assert get_problem(name, 3).k == 10
    assert get_problem("DTLZ2", 3, 5).n == 7
    assert DEFAULT_K["dtlz1"] == 5
    with pytest.raises(KeyError):
        get_problem("zdt1")


@pytest.mark.parametrize("m,k", [(1, 5), (3, 0)])
def test_invalid_shapes(m, k):
    with pytest.raises(ValueError):
        get_problem("dtlz2", m, k)


def test_dtlz2_corner_point():
    p = get_problem("dtlz2", 3)
    x = np.r_[0.0, 0.0, np.full(10, 0.5)]
    np.testing.assert_allclose(p.evaluate(x), [1.0, 0.0, 0.0], atol=1e-15)


def test_dtlz1_centre_point():
    p = get_problem("dtlz1", 3)
    np.testing.assert_allclose(p.evaluate(np.full(7, 0.5)), [0.125, 0.125, 0.25], rtol=1e-15)


def test_dtlz1_jacobian_hand_derivative():
    p = get_problem("dtlz1", 2)
    G = p.jacobian(np.full(p.n, 0.5))
    np.testing.assert_allclose(G[0], [0.5, -0.5], rtol=1e-15)
    # g has a stationary point at x_j = 0.5
    np.testing.assert_allclose(G[1:], 0.0, atol=1e-12)


def test_dtlz2_distance_rows_vanish_on_front(rng):
    p = get_problem("dtlz2", 2)
    x = p.optimal_solutions(rng.random(1))[0]
    G = p.jacobian(x)
    assert np.all(G[p.m - 1 :] == 0.0)


@pytest.mark.parametrize("name", NAMES)
def test_jacobian_matches_independent_central_difference(name, rng):
    # oracle differentiates evaluate() one objective at a time, sharing no code with jacobian_fd
    p = get_problem(name, 4)
    x = 0.05 + 0.9 * rng.random(p.n)
    G = p.jacobian(x)
    for i in range(p.m):
        g = central_difference_gradient(lambda z: p.evaluate(z)[i], x)
        np.testing.assert_allclose(G[:, i], g, rtol=1e-6, atol=1e-6 * np.abs(G).max())


@pytest.mark.parametrize("name", NAMES)
@pytest.mark.parametrize("m", [2, 3, 12])
def test_jacobian_matches_fd(name, m, rng):
    p = get_problem(name, m)
    for _ in range(10):
        x = rng.random(p.n)
        assert rel_err(jacobian_fd(p, x, 1e-6), p.jacobian(x)) <= 1e-6


def test_fd_exact_for_affine():
    class Linear(DTLZ2):
        c = np.array([[1.0, -2.0], [0.5, 3.0], [0.0, 7.0]])

        def _evaluate(self, X):
            assert np.all((X >= 0) & (X <= 1))
            return X @ self.c

    p = Linear(m=2, k=2)
    for x in (np.full(3, 0.3), np.array([0.0, 1.0, 0.5])):
        for h in (1e-2, 1e-4, 1e-7):
            np.testing.assert_allclose(jacobian_fd(p, x, h), Linear.c, rtol=1e-6, atol=1e-8)


def test_fd_boundary_never_leaves_box():
    seen = []

    class Spy(DTLZ2):
        def _evaluate(self, X):
            seen.append(X.copy())
            return super()._evaluate(X)

    p = Spy(m=3, k=3)
    x = np.array([0.0, 1.0, 0.0, 1.0, 0.5])
    G = jacobian_fd(p, x, 1e-6)
    allx = np.vstack(seen)
    assert allx.min() >= 0.0 and allx.max() <= 1.0
    assert rel_err(G, p.jacobian(x)) < 1e-6


def test_fd_rejects_nonpositive_step():
    p = get_problem("dtlz2", 3)
    with pytest.raises(ValueError):
        jacobian_fd(p, np.full(p.n, 0.5), 0.0)


def test_fd_uses_two_evaluations_per_coordinate():
    calls = []

    class Count(DTLZ2):
        def _evaluate(self, X):
            calls.append(X.shape[0])
            return super()._evaluate(X)

    p = Count(m=3, k=4)
    jacobian_fd(p, np.full(p.n, 0.5))
    assert sum(calls) == 2 * p.n


def test_rejects_out_of_bounds_and_wrong_length():
    p = get_problem("dtlz2", 3)
    with pytest.raises(ValueError, match="outside"):
        p.evaluate(np.r_[1.2, np.full(p.n - 1, 0.5)])
    with pytest.raises(ValueError, match="expected"):
        p.evaluate(np.full(p.n + 1, 0.5))
    with pytest.raises(ValueError):
        p.jacobian(np.full(p.n - 1, 0.5))


def test_batch_and_single_agree(rng):
    p = get_problem("dtlz5", 5)
    X = rng.random((7, p.n))
    F = p.evaluate(X)
    for x, f in zip(X, F):
        np.testing.assert_array_equal(p.evaluate(x), f)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=2))
def test_dtlz2_unit_norm_on_front(angles):
    p = get_problem("dtlz2", 3)
    x = p.optimal_solutions(np.array(angles))[0]
    assert abs(np.linalg.norm(p.evaluate(x)) - 1.0) <= 1e-12


@pytest.mark.parametrize("name", NAMES)
def test_front_samples_invariants(name):
    for m in (2, 3, 12):
        p = get_problem(name, m)
        F = p.sample_front(200, seed=3)
        assert F.shape == (200, m)
        assert np.all(F >= 0)
        if name == "dtlz1":
            np.testing.assert_allclose(F.sum(axis=1), 0.5, atol=1e-12)
        else:
            np.testing.assert_allclose(np.linalg.norm(F, axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(F, p.sample_front(200, seed=3))
        assert not np.array_equal(F, p.sample_front(200, seed=4))


def test_dtlz5_front_is_the_degenerate_curve():
    p = get_problem("dtlz5", 5)
    F = p.sample_front(100, seed=0)
    # on the curve theta_2..theta_{m-1} = pi/4, so f_1 = f_2 and f_{i+1} = f_i / cos(pi/4) for i >= 2
    np.testing.assert_allclose(F[:, 0], F[:, 1], atol=1e-12)
    for i in range(1, p.m - 2):
        np.testing.assert_allclose(F[:, i + 1], F[:, i] * np.sqrt(2.0), atol=1e-12)


def test_front_count_must_be_positive():
    with pytest.raises(ValueError):
        get_problem("dtlz2", 3).sample_front(0, seed=0)
