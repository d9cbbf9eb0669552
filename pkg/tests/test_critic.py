import numpy as np
import pytest

from qstack import (
    CriticWeights,
    DivergenceError,
    Regressor,
    RunningCost,
    Transition,
    bellman_error,
    critic_update,
    make_plant,
    q_value,
    running_cost,
    step_true,
)

REG = Regressor(2, 1)


def weights(w, alpha=0.1, n_iter=20):
    return CriticWeights(np.asarray(w, dtype=float), alpha=alpha, n_iter=n_iter)


class TestQValue:
    def test_zero_weights(self):
        assert q_value(REG, weights(np.zeros(6)), [1.5, -2.0], [0.3]) == 0.0

    def test_all_ones(self):
        assert q_value(REG, weights(np.ones(6)), [1, 2], [3]) == 25.0

    def test_first_basis_vector(self):
        e1 = np.zeros(6)
        e1[0] = 1.0
        assert q_value(REG, weights(e1), [1, 2], [3]) == 1.0


class TestBellmanError:
    def test_zero_case(self):
        t = Transition(np.zeros(2), np.zeros(1), np.zeros(2), 0.0)
        assert bellman_error(REG, np.zeros(6), np.zeros(6), t) == 0.0

    def test_hand_example(self):
        t = Transition(np.array([1.0, 0.0]), np.zeros(1), np.array([0.7, 0.7]), 1.0)
        assert bellman_error(REG, np.ones(6), np.zeros(6), t) == 0.0

    def test_matches_compositional_recomputation(self):
        # independent recomputation from q_value and running_cost
        rng = np.random.default_rng(3)
        cost = RunningCost(Q=2 * np.eye(2), R=[[2.0]])
        for _ in range(50):
            w_plus = rng.standard_normal(6)
            w_minus = rng.standard_normal(6)
            x = rng.uniform(-2, 2, 2)
            u = rng.uniform(-2, 2, 1)
            x1 = rng.uniform(-2, 2, 2)
            r = running_cost(cost, x, u)
            t = Transition(x, u, x1, r)
            expected = (q_value(REG, weights(w_plus), x, u)
                        - q_value(REG, weights(w_minus), x1, u) - r)
            assert bellman_error(REG, w_plus, w_minus, t) == pytest.approx(
                expected, abs=1e-12)

    def test_wrong_length_rejected(self):
        t = Transition(np.zeros(2), np.zeros(1), np.zeros(2), 0.0)
        with pytest.raises(ValueError):
            bellman_error(REG, np.zeros(5), np.zeros(6), t)


def case_study_transition():
    """First transition of the benchmark run: x0, u0 = 1, exact plant step."""
    plant = make_plant("lewis2d")
    cost = RunningCost(Q=2 * np.eye(2), R=[[2.0]])
    x = np.array([0.5, 1.0])
    u = np.array([1.0])
    x1 = step_true(plant, x, u)
    return Transition(x, u, x1, running_cost(cost, x, u))


class TestCriticUpdate:
    def test_alpha_zero_keeps_weights(self):
        t = case_study_transition()
        w0 = weights(np.ones(6), alpha=0.0, n_iter=5)
        w1, errors = critic_update(REG, w0, t)
        assert np.array_equal(w1.w, w0.w)
        assert errors.shape == (5,)

    def test_single_step_closed_form(self):
        # from zero weights, e0 = -r, so w becomes alpha * r * phi_k
        t = case_study_transition()
        w0 = weights(np.zeros(6), alpha=0.1, n_iter=1)
        w1, errors = critic_update(REG, w0, t)
        assert errors[0] == pytest.approx(-t.r_k, abs=1e-15)
        np.testing.assert_allclose(
            w1.w, 0.1 * t.r_k * REG.phi(t.x_k, t.u_k_minus), atol=1e-15)

    def test_exact_geometric_decay(self):
        t = case_study_transition()
        phi_k = REG.phi(t.x_k, t.u_k_minus)
        factor = 1.0 - 0.1 * float(phi_k @ phi_k)
        assert abs(factor) < 1.0
        _, errors = critic_update(REG, weights(np.ones(6), 0.1, 20), t)
        for i in range(len(errors) - 1):
            assert errors[i + 1] == pytest.approx(errors[i] * factor, rel=1e-10)

    def test_deterministic_bitwise(self):
        t = case_study_transition()
        w_a, e_a = critic_update(REG, weights(np.ones(6)), t)
        w_b, e_b = critic_update(REG, weights(np.ones(6)), t)
        assert np.array_equal(w_a.w, w_b.w)
        assert np.array_equal(e_a, e_b)

    def test_case_study_settings_stabilize(self):
        # after 20 iterations the last weight step is tiny relative to w
        t = case_study_transition()
        w1, errors = critic_update(REG, weights(np.ones(6), 0.1, 20), t)
        phi_k = REG.phi(t.x_k, t.u_k_minus)
        last_step = 0.1 * abs(errors[-1]) * np.linalg.norm(phi_k)
        assert last_step < 0.01 * np.linalg.norm(w1.w)

    def test_divergence_guard(self):
        # alpha ||phi||^2 >> 2 blows up the residual within the episode
        t = case_study_transition()
        with pytest.raises(DivergenceError):
            critic_update(REG, weights(np.ones(6), alpha=50.0, n_iter=50), t)

    def test_invalid_hyperparameters(self):
        with pytest.raises(ValueError):
            CriticWeights(np.ones(6), alpha=-0.1, n_iter=1)
        with pytest.raises(ValueError):
            CriticWeights(np.ones(6), alpha=0.1, n_iter=0)
