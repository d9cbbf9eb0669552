"""Actor-side updates: the four interchangeable controllers.

* ``adpq_update``  - single-step Q-learning actor: descend ``Qhat(x_next, u)``.
* ``sadpq_update`` - stacked actor: descend the sum of Q approximants along a
  model-predicted trajectory of ``N`` steps; only the first action is applied
  (receding horizon).
* ``mpc_update``   - same stacked structure with the running cost in place of
  the Q approximant (no terminal cost).
* ``gd_update``    - baseline: one literal descent step on the running cost.

The stacked gradient comes in two flavours. ``"direct"`` keeps only the
partial derivatives through the explicit control argument of each feature
vector, treating predicted states as constants. ``"total"`` adds the chain
rule through the identified linear model (``d x_i / d u_j = A^{i-j-1} B``),
making it the exact gradient of the stacked objective; it is the default.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .critic import CriticWeights
from .errors import DivergenceError
from .model_kf import ModelEstimate, rollout
from .plant import RunningCost
from .regressor import Regressor

GRADIENT_MODES = ("direct", "total")


@dataclass(frozen=True)
class ControlStack:
    """Receding-horizon stack of ``N`` future actions, flattened to ``N*m``.

    After each control step the caller applies slot 0 and calls
    :meth:`shifted`: slots ``1..N-1`` move down and the last slot is repeated.
    """

    u: np.ndarray
    m: int
    beta: float
    n_actor_iter: int = 1

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        if self.u.ndim != 1 or self.u.size == 0 or self.u.size % self.m:
            raise ValueError("stack length must be a positive multiple of m")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if self.n_actor_iter < 1:
            raise ValueError("n_actor_iter must be >= 1")

    @property
    def horizon(self) -> int:
        return self.u.size // self.m

    def first(self) -> np.ndarray:
        """The action to apply at the current step."""
        return self.u[: self.m].copy()

    def as_matrix(self) -> np.ndarray:
        return self.u.reshape(self.horizon, self.m)

    def shifted(self) -> "ControlStack":
        """Receding-horizon shift: drop slot 0, duplicate the last slot."""
        return replace(self, u=np.concatenate((self.u[self.m:], self.u[-self.m:])))

    @classmethod
    def constant(cls, value, horizon: int, m: int, beta: float,
                 n_actor_iter: int = 1) -> "ControlStack":
        """Stack with every slot set to ``value`` (scalar or length-``m``)."""
        slot = np.broadcast_to(np.asarray(value, dtype=float), (m,))
        return cls(u=np.tile(slot, horizon), m=m, beta=beta,
                   n_actor_iter=n_actor_iter)


def _check_finite(u: np.ndarray, who: str) -> None:
    if not np.all(np.isfinite(u)):
        raise DivergenceError(f"{who} produced a non-finite control; reduce beta")


def adpq_update(reg: Regressor, u, x_next, weights: CriticWeights,
                beta: float, n_actor_iter: int = 1) -> np.ndarray:
    """Single-step actor: ``u <- u - beta * dphi_du(x_next, u)^T w``.

    ``x_next`` (normally the model-predicted next state) is held fixed
    across the iterations.
    """
    u = np.asarray(u, dtype=float)
    for _ in range(n_actor_iter):
        u = u - beta * (reg.dphi_du(x_next, u).T @ weights.w)
    _check_finite(u, "adpq_update")
    return u


def stacked_objective(reg: Regressor, weights: CriticWeights,
                      est: ModelEstimate, x_k, stack: ControlStack) -> float:
    """Sum of Q approximants along the model-predicted trajectory.

    Term ``i`` (1-based) evaluates ``w @ phi(x_i, u_{i-1})`` where the states
    come from rolling the identified model out of ``x_k`` under the stack.
    """
    states = rollout(est, x_k, stack.as_matrix())
    actions = stack.as_matrix()
    return float(sum(
        weights.w @ reg.phi(states[i], actions[i])
        for i in range(stack.horizon)
    ))


def stacked_gradient(reg: Regressor, weights: CriticWeights,
                     est: ModelEstimate, x_k, stack: ControlStack,
                     mode: str = "total") -> np.ndarray:
    """Gradient of the stacked objective with respect to the flat stack.

    ``mode="direct"`` returns only the per-slot terms
    ``dphi_du(x_{j+1}, u_j)^T w`` (predicted states treated as constants);
    ``mode="total"`` adds the chain-rule terms through the model, computed
    by an adjoint backward recursion, and equals the exact gradient.
    """
    if mode not in GRADIENT_MODES:
        raise ValueError(f"mode must be one of {GRADIENT_MODES}, got {mode!r}")
    states = rollout(est, x_k, stack.as_matrix())
    actions = stack.as_matrix()
    N = stack.horizon
    grad = np.empty((N, reg.m))
    for j in range(N):
        grad[j] = reg.dphi_du(states[j], actions[j]).T @ weights.w
    if mode == "total":
        # lam accumulates sum_{i>=j} (A^T)^(i-j) s_i with
        # s_i = dphi_dx(x_{i+1}, u_i)^T w; slot j then receives B^T lam_j.
        lam = np.zeros(est.n)
        At = est.A.T
        Bt = est.B.T
        for j in range(N - 1, -1, -1):
            lam = At @ lam + reg.dphi_dx(states[j], actions[j]).T @ weights.w
            grad[j] += Bt @ lam
    return grad.ravel()


def sadpq_update(reg: Regressor, stack: ControlStack, weights: CriticWeights,
                 est: ModelEstimate, x_k, mode: str = "total") -> ControlStack:
    """Descend the stacked Q objective for ``n_actor_iter`` iterations.

    The model rollout is re-evaluated at every iterate, so in ``"total"``
    mode each step uses the exact current gradient. The caller applies only
    the first slot of the returned stack.
    """
    u = stack.u
    for _ in range(stack.n_actor_iter):
        current = replace(stack, u=u)
        u = u - stack.beta * stacked_gradient(reg, weights, est, x_k, current, mode)
    _check_finite(u, "sadpq_update")
    return replace(stack, u=u)


def _stacked_cost_gradient(cost: RunningCost, est: ModelEstimate,
                           x_k, stack: ControlStack) -> np.ndarray:
    # Same adjoint recursion as the Q version with s_i = Q x_i, direct R u_j.
    states = rollout(est, x_k, stack.as_matrix())
    actions = stack.as_matrix()
    N = stack.horizon
    grad = np.empty((N, stack.m))
    lam = np.zeros(est.n)
    At = est.A.T
    Bt = est.B.T
    for j in range(N - 1, -1, -1):
        lam = At @ lam + cost.Q @ states[j]
        grad[j] = cost.R @ actions[j] + Bt @ lam
    return grad.ravel()


def stacked_cost_objective(cost: RunningCost, est: ModelEstimate,
                           x_k, stack: ControlStack) -> float:
    """Sum of running costs along the model-predicted trajectory."""
    states = rollout(est, x_k, stack.as_matrix())
    actions = stack.as_matrix()
    return float(sum(
        0.5 * states[i] @ cost.Q @ states[i] + 0.5 * actions[i] @ cost.R @ actions[i]
        for i in range(stack.horizon)
    ))


def mpc_update(stack: ControlStack, cost: RunningCost, est: ModelEstimate,
               x_k) -> ControlStack:
    """Descend the stacked running cost (adaptive-MPC variant, no terminal cost)."""
    u = stack.u
    for _ in range(stack.n_actor_iter):
        current = replace(stack, u=u)
        u = u - stack.beta * _stacked_cost_gradient(cost, est, x_k, current)
    _check_finite(u, "mpc_update")
    return replace(stack, u=u)


def gd_update(u, x_next, B_est, beta: float) -> np.ndarray:
    """Baseline rule ``u <- u - beta * (B^T x_next + u)``, applied once."""
    u = np.asarray(u, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    B_est = np.asarray(B_est, dtype=float)
    return u - beta * (B_est.T @ x_next + u)


def greedy_gain(reg: Regressor, weights: CriticWeights) -> np.ndarray:
    """Closed-form argmin of the approximant over its control slot, as a gain.

    The actor's inner problem minimizes ``w @ phi(x_slot, u)`` over ``u`` with
    the state slot held fixed. For the quadratic approximant with symmetric
    matrix ``M`` that minimizer is linear, ``u = K x_slot`` with
    ``K = -M_uu^{-1} M_ux``; ``M_uu`` must be positive definite.
    """
    n = reg.n
    M = reg.weights_to_matrix(weights.w)
    return -np.linalg.solve(M[n:, n:], M[n:, :n])


def greedy_control(reg: Regressor, weights: CriticWeights, x_slot) -> np.ndarray:
    """Exact minimizer of ``w @ phi(x_slot, u)`` over ``u``."""
    return greedy_gain(reg, weights) @ np.asarray(x_slot, dtype=float)
