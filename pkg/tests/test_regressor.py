import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qstack import Regressor

from oracles import fd_jacobian_wrt_u, fd_jacobian_wrt_x


def test_feature_count_formula():
    assert Regressor(2, 1).p == 6
    assert Regressor(3, 2).p == 15
    assert Regressor(1, 1).p == 3


def test_phi_zero_input():
    reg = Regressor(2, 1)
    assert np.array_equal(reg.phi([0, 0], [0]), np.zeros(6))


def test_phi_hand_example():
    reg = Regressor(2, 1)
    np.testing.assert_array_equal(reg.phi([1, 2], [3]), [1, 2, 3, 4, 6, 9])


def test_phi_dimension_mismatch():
    reg = Regressor(2, 1)
    with pytest.raises(ValueError):
        reg.phi([1, 2, 3], [1])
    with pytest.raises(ValueError):
        reg.phi([1, 2], [1, 1])


def test_dphi_du_hand_example():
    reg = Regressor(2, 1)
    np.testing.assert_allclose(reg.dphi_du([1, 2], [3])[:, 0],
                               [0, 0, 1, 0, 2, 6], atol=1e-12)


def test_dphi_dx_hand_example():
    reg = Regressor(2, 1)
    jac = reg.dphi_dx([1, 2], [3])
    np.testing.assert_allclose(jac[:, 0], [2, 2, 3, 0, 0, 0], atol=1e-12)
    np.testing.assert_allclose(jac[:, 1], [0, 1, 0, 4, 3, 0], atol=1e-12)


def test_gradients_zero_at_origin():
    reg = Regressor(2, 1)
    assert np.array_equal(reg.dphi_du([0, 0], [0]), np.zeros((6, 1)))
    assert np.array_equal(reg.dphi_dx([0, 0], [0]), np.zeros((6, 2)))


@pytest.mark.parametrize("n,m", [(2, 1), (1, 1), (3, 2)])
def test_gradients_match_finite_differences(n, m):
    reg = Regressor(n, m)
    rng = np.random.default_rng(42)
    for _ in range(100):
        x = rng.uniform(-10, 10, n)
        u = rng.uniform(-10, 10, m)
        fd_u = fd_jacobian_wrt_u(reg.phi, x, u)
        fd_x = fd_jacobian_wrt_x(reg.phi, x, u)
        scale = max(1.0, np.abs(fd_u).max())
        np.testing.assert_allclose(reg.dphi_du(x, u), fd_u, atol=1e-6 * scale)
        scale = max(1.0, np.abs(fd_x).max())
        np.testing.assert_allclose(reg.dphi_dx(x, u), fd_x, atol=1e-6 * scale)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=3))
def test_phi_even_under_sign_flip(vals):
    reg = Regressor(2, 1)
    x = np.array(vals[:2])
    u = np.array(vals[2:])
    np.testing.assert_array_equal(reg.phi(-x, -u), reg.phi(x, u))


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
@settings(max_examples=200)
def test_weight_matrix_quadratic_form_identity(w_vals, z_vals):
    reg = Regressor(2, 1)
    w = np.array(w_vals)
    x, u = np.array(z_vals[:2]), np.array(z_vals[2:])
    z = np.concatenate([x, u])
    M = reg.weights_to_matrix(w)
    assert abs(w @ reg.phi(x, u) - z @ M @ z) <= 1e-12 * max(1.0, abs(z @ M @ z))


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_weight_matrix_round_trip(w_vals):
    reg = Regressor(2, 1)
    w = np.array(w_vals)
    np.testing.assert_allclose(reg.matrix_to_weights(reg.weights_to_matrix(w)),
                               w, atol=1e-12)


def test_matrix_round_trip_from_symmetric():
    reg = Regressor(2, 1)
    rng = np.random.default_rng(0)
    S = rng.standard_normal((3, 3))
    S = 0.5 * (S + S.T)
    np.testing.assert_allclose(reg.weights_to_matrix(reg.matrix_to_weights(S)),
                               S, atol=1e-12)
