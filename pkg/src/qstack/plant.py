"""Simulated plants, the quadratic running cost, and the measurement channel.

Controllers never see the true transition function; they only receive noisy
state measurements. The built-in preset ``"lewis2d"`` is a two-dimensional
nonlinear benchmark with scalar control:

    x1+ = -sin(0.5 x2)
    x2+ = -cos(1.4 x2) sin(0.9 x1) + u
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class PlantModel:
    """Deterministic discrete-time system ``x_{k+1} = f(x_k, u_k)``."""

    n: int
    m: int
    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"


def _lewis2d_step(x, u):
    return np.array([
        -np.sin(0.5 * x[1]),
        -np.cos(1.4 * x[1]) * np.sin(0.9 * x[0]) + u[0],
    ])


def make_plant(name: str = "lewis2d") -> PlantModel:
    """Look up a plant preset by name."""
    try:
        return PLANT_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown plant preset {name!r}; available: {sorted(PLANT_PRESETS)}"
        ) from None


PLANT_PRESETS = {
    "lewis2d": PlantModel(n=2, m=1, step=_lewis2d_step, name="lewis2d"),
}


def step_true(plant: PlantModel, x, u) -> np.ndarray:
    """Advance the true plant one step. Pure; adds no noise."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (plant.n,):
        raise ValueError(f"state must have shape ({plant.n},), got {x.shape}")
    if u.shape != (plant.m,):
        raise ValueError(f"control must have shape ({plant.m},), got {u.shape}")
    x_next = np.asarray(plant.step(x, u), dtype=float)
    if x_next.shape != (plant.n,):
        raise ValueError("plant step returned a vector of wrong dimension")
    return x_next


@dataclass(frozen=True)
class RunningCost:
    """Per-step cost ``r(x, u) = 0.5 x^T Q x + 0.5 u^T R u``.

    Both weight matrices must be symmetric positive definite, which makes
    ``r`` nonnegative and zero only at the origin.
    """

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, dtype=float)))
        for name, mat in (("Q", self.Q), ("R", self.R)):
            if mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.allclose(mat, mat.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(mat).min() <= 0:
                raise ValueError(f"{name} must be positive definite")


def running_cost(cost: RunningCost, x, u) -> float:
    """Evaluate the quadratic running cost at ``(x, u)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (cost.Q.shape[0],):
        raise ValueError(f"state must have shape ({cost.Q.shape[0]},), got {x.shape}")
    if u.shape != (cost.R.shape[0],):
        raise ValueError(f"control must have shape ({cost.R.shape[0]},), got {u.shape}")
    return float(0.5 * x @ cost.Q @ x + 0.5 * u @ cost.R @ u)


class MeasurementChannel:
    """Additive Gaussian measurement noise with a seeded counter-based RNG.

    Draws use numpy's Philox bit generator, so two channels built with equal
    seeds produce identical noise sequences, and traces are reproducible
    across runs. ``sigma = 0`` makes the channel the identity (the RNG still
    advances so wirings with and without noise consume the same stream).
    """

    def __init__(self, sigma: float, seed: int):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.sigma = float(sigma)
        self.seed = int(seed)
        self._rng = np.random.Generator(np.random.Philox(self.seed))

    def standard_normal(self, size) -> np.ndarray:
        return self._rng.standard_normal(size)


def measure(chan: MeasurementChannel, x) -> np.ndarray:
    """Return ``x + sigma * eta`` with ``eta ~ N(0, I)``; advances the RNG."""
    x = np.asarray(x, dtype=float)
    return x + chan.sigma * chan.standard_normal(x.shape)
