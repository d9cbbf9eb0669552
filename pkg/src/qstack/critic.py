"""Q-function critic: value evaluation and gradient-descent weight updates.

The approximant is linear in the features, ``Qhat(x, u) = w @ phi(x, u)``.
One critic episode descends half the squared one-step consistency residual

    e = w_plus @ phi(x_k, u) - w_minus @ phi(x_{k+1}, u) - r_k

on a single transition, holding ``w_minus`` (the pre-episode weights) and the
transition data fixed. Because the descent direction is always ``phi_k``, the
residual contracts exactly by the factor ``1 - alpha * ||phi_k||^2`` per
iteration; the per-iteration residual sequence is returned for logging.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError
from .regressor import Regressor

#: residual magnitude above which an episode is treated as diverged
DIVERGENCE_LIMIT = 1e9


@dataclass(frozen=True)
class CriticWeights:
    """Approximant weights plus the episode hyperparameters.

    ``w`` has length ``p = (n+m)(n+m+1)/2``; ``alpha`` is the descent gain
    (zero allowed for frozen-critic tests); ``n_iter`` the iterations per
    episode.
    """

    w: np.ndarray
    alpha: float
    n_iter: int

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if self.w.ndim != 1:
            raise ValueError("weights must be a vector")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.n_iter < 1:
            raise ValueError("n_iter must be >= 1")


@dataclass(frozen=True)
class Transition:
    """One-step experience ``(x_k, u_k^-, x_{k+1}, r_k)`` feeding an episode.

    ``x_k1`` is typically the model-predicted next state and ``r_k`` the
    running cost at ``(x_k, u_k_minus)``.
    """

    x_k: np.ndarray
    u_k_minus: np.ndarray
    x_k1: np.ndarray
    r_k: float


def q_value(reg: Regressor, weights: CriticWeights, x, u) -> float:
    """Evaluate ``Qhat(x, u) = w @ phi(x, u)``."""
    return float(weights.w @ reg.phi(x, u))


def bellman_error(reg: Regressor, w_plus, w_minus, t: Transition) -> float:
    """One-step consistency residual for the given weight pair."""
    w_plus = np.asarray(w_plus, dtype=float)
    w_minus = np.asarray(w_minus, dtype=float)
    if w_plus.shape != (reg.p,) or w_minus.shape != (reg.p,):
        raise ValueError(f"weight vectors must have shape ({reg.p},)")
    return float(
        w_plus @ reg.phi(t.x_k, t.u_k_minus)
        - w_minus @ reg.phi(t.x_k1, t.u_k_minus)
        - t.r_k
    )


def critic_update(
    reg: Regressor, weights: CriticWeights, t: Transition
) -> tuple[CriticWeights, np.ndarray]:
    """Run one critic episode on a single transition.

    Returns the updated weights and the residual sequence (one entry per
    iteration, evaluated before each weight step).

    Raises
    ------
    DivergenceError
        If a residual exceeds ``DIVERGENCE_LIMIT`` or becomes non-finite,
        which indicates ``alpha * ||phi_k||^2 >= 2``.
    """
    phi_k = reg.phi(t.x_k, t.u_k_minus)
    # Frozen target: w_minus stays at the incoming weights for all iterations.
    target = float(weights.w @ reg.phi(t.x_k1, t.u_k_minus)) + t.r_k
    w_plus = weights.w.copy()
    errors = np.empty(weights.n_iter)
    for i in range(weights.n_iter):
        e = float(w_plus @ phi_k) - target
        if not np.isfinite(e) or abs(e) > DIVERGENCE_LIMIT:
            raise DivergenceError(
                f"critic episode diverged at iteration {i} (|e| = {abs(e):.3e}); "
                "reduce alpha"
            )
        errors[i] = e
        w_plus = w_plus - weights.alpha * e * phi_k
    return replace(weights, w=w_plus), errors
