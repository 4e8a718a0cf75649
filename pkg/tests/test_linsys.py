import numpy as np
import pytest

from dynembed.graphs import load_edge_list
from dynembed.linsys import (
    LinearSystem,
    diffusion_system,
    discrete_walk_system,
    impulse_response_matrix,
    propagator,
)

from oracles import random_stable_matrix, two_node_diffusion_propagator


def identity_system(A, mode="continuous"):
    m = A.shape[0]
    return LinearSystem(A, np.eye(m), np.eye(m), np.eye(m), mode)


class TestConstruction:
    def test_dimension_checks(self):
        A = np.zeros((3, 3))
        with pytest.raises(ValueError, match="square"):
            LinearSystem(np.zeros((3, 2)), np.eye(3), np.eye(3), np.eye(3))
        with pytest.raises(ValueError, match="rows"):
            LinearSystem(A, np.zeros((2, 3)), np.eye(3), np.eye(3))
        with pytest.raises(ValueError, match="columns"):
            LinearSystem(A, np.eye(3), np.zeros((2, 2)), np.eye(2))
        with pytest.raises(ValueError, match="weighting"):
            LinearSystem(A, np.eye(3), np.eye(3), np.eye(2))

    def test_weighting_must_be_symmetric_psd(self):
        A = np.zeros((2, 2))
        with pytest.raises(ValueError, match="symmetric"):
            LinearSystem(A, np.eye(2), np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(ValueError, match="PSD"):
            LinearSystem(A, np.eye(2), np.eye(2), -np.eye(2))

    def test_rectangular_maps_allowed(self):
        sys = LinearSystem(np.zeros((3, 3)), np.eye(3)[:, :2], np.eye(3)[:1], np.eye(1))
        assert sys.input_dim == 2 and sys.output_dim == 1


class TestPropagator:
    def test_zero_generator_is_identity(self):
        sys = identity_system(np.zeros((4, 4)))
        assert np.array_equal(propagator(sys, 5.0), np.eye(4))

    def test_two_node_diffusion_closed_form(self):
        g = load_edge_list(["a\tb\t1"])
        sys = diffusion_system(g)
        for t in (0.2, 1.0, 3.7):
            assert np.abs(propagator(sys, t) - two_node_diffusion_propagator(t)).max() <= 1e-12

    def test_discrete_swap_squared_is_identity(self):
        sys = identity_system(np.array([[0.0, 1.0], [1.0, 0.0]]), mode="discrete")
        assert np.array_equal(propagator(sys, 2), np.eye(2))

    def test_discrete_rejects_fractional_time(self):
        sys = identity_system(np.eye(2), mode="discrete")
        with pytest.raises(ValueError, match="integer"):
            propagator(sys, 1.5)

    def test_negative_time_rejected(self):
        sys = identity_system(np.eye(2))
        with pytest.raises(ValueError, match="nonnegative"):
            propagator(sys, -0.1)


class TestImpulseResponse:
    def test_identity_maps_at_time_zero(self):
        sys = identity_system(np.ones((3, 3)))
        assert np.array_equal(impulse_response_matrix(sys, 0.0).Y, np.eye(3))

    def test_centered_two_node_column(self):
        g = load_edge_list(["a\tb\t1"])
        C = np.eye(2) - 0.5 * np.ones((2, 2))
        sys = LinearSystem(diffusion_system(g).A_op, np.eye(2), C, np.eye(2))
        for t in (0.3, 1.1):
            col = impulse_response_matrix(sys, t).Y[:, 0]
            assert np.abs(col - np.exp(-2 * t) * np.array([0.5, -0.5])).max() <= 1e-12

    def test_single_input_column(self):
        rng = np.random.default_rng(0)
        A = random_stable_matrix(rng, 5)
        B = np.eye(5)[:, [0]]
        sys = LinearSystem(A, B, np.eye(5), np.eye(5))
        resp = impulse_response_matrix(sys, 0.8)
        assert resp.Y.shape == (5, 1)
        assert np.allclose(resp.Y[:, 0], propagator(sys, 0.8)[:, 0])


class TestPropagatorProperties:
    def test_semigroup_property(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            m = int(rng.integers(2, 13))
            sys = identity_system(random_stable_matrix(rng, m))
            for s, t in ((0.3, 1.0), (1.0, 2.0)):
                left = propagator(sys, s + t)
                right = propagator(sys, s) @ propagator(sys, t)
                scale = np.abs(left).max()
                assert np.abs(left - right).max() <= 1e-8 * max(scale, 1.0)

    def test_derivative_matches_generator(self):
        rng = np.random.default_rng(7)
        h = 1e-4
        for _ in range(10):
            m = int(rng.integers(2, 10))
            A = random_stable_matrix(rng, m)
            sys = identity_system(A)
            t = float(rng.uniform(0.2, 2.0))
            lhs = (propagator(sys, t + h) - propagator(sys, t - h)) / (2 * h)
            rhs = A @ propagator(sys, t)
            assert np.abs(lhs - rhs).max() <= 1e-5 * max(1.0, np.abs(rhs).max())

    def test_probability_conservation(self):
        rng = np.random.default_rng(11)
        from oracles import random_connected_graph

        for _ in range(10):
            g = random_connected_graph(rng, int(rng.integers(3, 10)))
            sys = diffusion_system(g)
            P = propagator(sys, float(rng.uniform(0.1, 5.0))).T
            p0 = rng.random(g.n)
            p0 /= p0.sum()
            assert abs((P @ p0).sum() - 1.0) <= 1e-10


def test_discrete_walk_matches_transition_powers():
    g = load_edge_list(["a\tb\t1", "b\tc\t1", "c\ta\t1"], directed=True)
    sys = discrete_walk_system(g)
    from dynembed.graphs import discrete_transition_matrix

    M = discrete_transition_matrix(g)
    assert np.allclose(propagator(sys, 3), np.linalg.matrix_power(M.T, 3))
