"""Quadratic feature map for the Q-function approximant.

The features are all degree-2 monomials ``z_i * z_j`` (``i <= j``) of the
stacked state-control vector ``z = (x | u)``, i.e. the row-major
vectorization of the upper triangle (diagonal included) of ``z z^T``:

    (1,1), (1,2), ..., (1,q), (2,2), (2,3), ..., (q,q),   q = n + m.

This ordering is fixed; every consumer of a weight vector relies on it.
"""

from __future__ import annotations

import numpy as np


class Regressor:
    """Feature map ``phi(x, u)`` and its analytic Jacobians.

    Parameters
    ----------
    n : int
        State dimension.
    m : int
        Control dimension.

    Attributes
    ----------
    p : int
        Feature count, ``(n+m)(n+m+1)/2``.
    """

    def __init__(self, n: int, m: int):
        if n < 1 or m < 1:
            raise ValueError("state and control dimensions must be >= 1")
        self.n = int(n)
        self.m = int(m)
        self.q = self.n + self.m
        self.p = self.q * (self.q + 1) // 2
        # Row-major upper-triangle index pairs; these fix the feature order.
        self._iu, self._ju = np.triu_indices(self.q)
        self._rows = np.arange(self.p)

    def __repr__(self):
        return f"Regressor(n={self.n}, m={self.m})"

    def _stack(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"state must have shape ({self.n},), got {x.shape}")
        if u.shape != (self.m,):
            raise ValueError(f"control must have shape ({self.m},), got {u.shape}")
        return np.concatenate((x, u))

    def phi(self, x, u) -> np.ndarray:
        """Feature vector of length ``p`` at ``(x, u)``."""
        z = self._stack(x, u)
        return z[self._iu] * z[self._ju]

    def _dphi_dz(self, z: np.ndarray) -> np.ndarray:
        # d(z_i z_j)/dz_k = z_j [k=i] + z_i [k=j]; diagonal features get 2 z_i.
        jac = np.zeros((self.p, self.q))
        jac[self._rows, self._iu] += z[self._ju]
        jac[self._rows, self._ju] += z[self._iu]
        return jac

    def dphi_du(self, x, u) -> np.ndarray:
        """Exact Jacobian of ``phi`` with respect to ``u``, shape ``(p, m)``."""
        return self._dphi_dz(self._stack(x, u))[:, self.n:]

    def dphi_dx(self, x, u) -> np.ndarray:
        """Exact Jacobian of ``phi`` with respect to ``x``, shape ``(p, n)``."""
        return self._dphi_dz(self._stack(x, u))[:, :self.n]

    def weights_to_matrix(self, w) -> np.ndarray:
        """Symmetric matrix ``M`` with ``w @ phi(x, u) == z @ M @ z``.

        The features carry each cross monomial once, so off-diagonal weights
        are split in half across the two symmetric entries.
        """
        w = np.asarray(w, dtype=float)
        if w.shape != (self.p,):
            raise ValueError(f"weights must have shape ({self.p},), got {w.shape}")
        mat = np.zeros((self.q, self.q))
        mat[self._iu, self._ju] = w
        return 0.5 * (mat + mat.T)

    def matrix_to_weights(self, mat) -> np.ndarray:
        """Inverse of :meth:`weights_to_matrix` for symmetric ``mat``."""
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (self.q, self.q):
            raise ValueError(f"matrix must have shape ({self.q}, {self.q})")
        scale = 2.0 - np.eye(self.q)  # doubles off-diagonal entries
        return (mat * scale)[self._iu, self._ju]
