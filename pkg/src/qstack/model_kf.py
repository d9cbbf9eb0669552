"""Online identification of a linear prediction model with a Kalman filter.

The controller-side model is ``x_{k+1} = A x_k + B u_k`` with unknown
``(A, B)``. The entries are treated as a random-walk parameter vector
``theta = (vec A | vec B)`` (row-major over A's rows, then B's rows) and
estimated from the stacked regression over the ``L`` most recent measured
transitions:

    y = H theta,   H block row i = ( I_n kron x_i^T | I_n kron u_i^T ),
                   y block     i = x_{i+1}.

One predict/correct cycle runs per control step. Until the stack holds ``L``
transitions the correction uses all available rows (growing stack), so there
is no dead period at startup.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import EstimatorError

#: diagonal jitter added to the innovation covariance if its Cholesky fails
_CHOLESKY_JITTER = 1e-12


@dataclass(frozen=True)
class ModelEstimate:
    """Linear model parameters and their Kalman covariance state.

    ``P`` and ``Q_kf`` act on the parameter vector (size ``n^2 + n m``);
    ``R_kf`` on the stacked measurement (size ``n L``). ``P`` is
    re-symmetrized after every correction.
    """

    A: np.ndarray
    B: np.ndarray
    P: np.ndarray
    Q_kf: np.ndarray
    R_kf: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """Parameter vector ``(vec A | vec B)``, row-major."""
        return np.concatenate((self.A.ravel(), self.B.ravel()))


def theta_to_matrices(theta: np.ndarray, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major ``(vec A | vec B)`` packing."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n * n + n * m,):
        raise ValueError(f"parameter vector must have length {n * n + n * m}")
    return theta[: n * n].reshape(n, n), theta[n * n:].reshape(n, m)


def initial_estimate(
    n: int,
    m: int,
    L: int,
    p0: float = 1e3,
    q_kf: float = 1e-6,
    r_kf: float = 1e-6,
) -> ModelEstimate:
    """Identity-prior estimate: ``A = I`` (persistence), ``B = 0``, large ``P``."""
    d = n * n + n * m
    return ModelEstimate(
        A=np.eye(n),
        B=np.zeros((n, m)),
        P=p0 * np.eye(d),
        Q_kf=q_kf * np.eye(d),
        R_kf=r_kf * np.eye(n * L),
    )


class SampleStack:
    """Ring buffers of the ``L+1`` newest measured states and ``L`` controls.

    Chronological order; transition ``i`` pairs ``(states[i], controls[i])``
    with successor ``states[i+1]``.
    """

    def __init__(self, L: int):
        if L < 1:
            raise ValueError("stack size L must be >= 1")
        self.L = int(L)
        self.states: deque[np.ndarray] = deque(maxlen=self.L + 1)
        self.controls: deque[np.ndarray] = deque(maxlen=self.L)

    def append_state(self, x) -> None:
        self.states.append(np.asarray(x, dtype=float))

    def append_control(self, u) -> None:
        self.controls.append(np.asarray(u, dtype=float))

    @property
    def n_transitions(self) -> int:
        return min(len(self.states) - 1, len(self.controls))


def regression_matrices(stack: SampleStack) -> tuple[np.ndarray, np.ndarray]:
    """Stacked regression ``(H, y)`` over all transitions currently held.

    ``H`` has one ``n``-row block per transition, laid out so that
    ``H @ theta`` equals the stacked model predictions ``A x_i + B u_i``.
    """
    T = stack.n_transitions
    if T < 1:
        raise ValueError("sample stack holds no transitions")
    states = list(stack.states)
    controls = list(stack.controls)
    n = states[0].shape[0]
    m = controls[0].shape[0]
    H = np.zeros((n * T, n * n + n * m))
    y = np.empty(n * T)
    for i in range(T):
        x_i, u_i = states[i], controls[i]
        for r in range(n):
            row = i * n + r
            H[row, r * n:(r + 1) * n] = x_i
            H[row, n * n + r * m: n * n + (r + 1) * m] = u_i
        y[i * n:(i + 1) * n] = states[i + 1]
    return H, y


def kf_predict(est: ModelEstimate) -> ModelEstimate:
    """Random-walk time update: parameters unchanged, covariance inflated."""
    return replace(est, P=est.P + est.Q_kf)


def kf_correct(est: ModelEstimate, stack: SampleStack) -> ModelEstimate:
    """Measurement update from the stacked regression.

    Solves the innovation system through a symmetric positive-definite
    factorization (with a tiny diagonal jitter fallback); no explicit
    inverse is formed.
    """
    H, y = regression_matrices(stack)
    d = y.shape[0]
    innovation = y - H @ est.theta
    PHt = est.P @ H.T
    S = H @ PHt + est.R_kf[:d, :d]
    try:
        chol = scipy.linalg.cho_factor(S, check_finite=False)
    except scipy.linalg.LinAlgError:
        try:
            chol = scipy.linalg.cho_factor(
                S + _CHOLESKY_JITTER * np.eye(d), check_finite=False
            )
        except scipy.linalg.LinAlgError:
            raise EstimatorError(
                "innovation covariance numerically singular "
                f"(cond ~ {np.linalg.cond(S):.3e})",
                condition_number=float(np.linalg.cond(S)),
            ) from None
    gain = scipy.linalg.cho_solve(chol, PHt.T, check_finite=False).T
    theta = est.theta + gain @ innovation
    P = est.P - gain @ PHt.T
    P = 0.5 * (P + P.T)
    A, B = theta_to_matrices(theta, est.n, est.m)
    return replace(est, A=A, B=B, P=P)


def predict_state(est: ModelEstimate, x, u) -> np.ndarray:
    """One-step model prediction ``A x + B u``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (est.n,):
        raise ValueError(f"state must have shape ({est.n},), got {x.shape}")
    if u.shape != (est.m,):
        raise ValueError(f"control must have shape ({est.m},), got {u.shape}")
    return est.A @ x + est.B @ u


def rollout(est: ModelEstimate, x0, controls) -> np.ndarray:
    """Predicted states over a control sequence, shape ``(N, n)``.

    ``controls`` is an ``(N, m)`` array (a flat length-``N*m`` vector is
    reshaped). Row ``i`` is the prediction after applying ``controls[i]``.
    """
    controls = np.asarray(controls, dtype=float).reshape(-1, est.m)
    if controls.shape[0] < 1:
        raise ValueError("rollout needs at least one control")
    states = np.empty((controls.shape[0], est.n))
    x = np.asarray(x0, dtype=float)
    for i, u in enumerate(controls):
        x = predict_state(est, x, u)
        states[i] = x
    return states
