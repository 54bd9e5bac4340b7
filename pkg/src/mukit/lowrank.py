"""Logistic loss under a spectral-norm perturbation of the data matrix.

For any ``X_tilde`` of the same shape,

    |L(beta; X) - L(beta; X_tilde)| <= sqrt(n) ||X - X_tilde||_2 ||beta||_2,

with every label -1, i.e. ``L(beta; X) = sum_i log(1 + exp(x_i^T beta))``.
The scaled identity ``X = x I``, ``X_tilde = (x + s) I``, ``beta = 1``
shows the bound cannot be improved: the gap tends to ``s n`` as x grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mukit.core import DimensionError, as_data_matrix, as_param, softplus


@dataclass(frozen=True)
class LowRankApprox:
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    spectral_error: float

    @property
    def rank(self) -> int:
        return self.s.size

    @property
    def X_tilde(self) -> np.ndarray:
        return (self.U * self.s) @ self.Vt


def truncated_svd(X, r: int) -> LowRankApprox:
    """Best rank-r approximation in spectral norm; the error is ``sigma_{r+1}``."""
    X = as_data_matrix(X)
    if int(r) != r or not 0 <= r <= min(X.shape):
        raise ValueError(f"rank must be an integer in [0, {min(X.shape)}], got {r}")
    r = int(r)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    err = float(s[r]) if r < s.size else 0.0
    return LowRankApprox(U=U[:, :r], s=s[:r], Vt=Vt[:r], spectral_error=err)


def _pair(X, X_tilde, beta):
    X = as_data_matrix(X)
    X_tilde = as_data_matrix(X_tilde)
    if X.shape != X_tilde.shape:
        raise DimensionError(f"shapes differ: {X.shape} vs {X_tilde.shape}")
    return X, X_tilde, as_param(beta, X.shape[1])


def additive_bound(X, X_tilde, beta) -> float:
    """``sqrt(n) * ||X - X_tilde||_2 * ||beta||_2``."""
    X, X_tilde, beta = _pair(X, X_tilde, beta)
    return math.sqrt(X.shape[0]) * float(np.linalg.norm(X - X_tilde, 2)) * float(np.linalg.norm(beta))


def loss_gap(X, X_tilde, beta) -> float:
    """``|L(beta; X) - L(beta; X_tilde)|`` with every label -1."""
    X, X_tilde, beta = _pair(X, X_tilde, beta)
    # difference of sums computed termwise to avoid cancellation between
    # two large totals
    return float(abs(np.sum(softplus(X @ beta) - softplus(X_tilde @ beta))))


def tightness_instance(n: int, x: float, s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(x I_n, (x + s) I_n, 1_n)``."""
    if n < 1:
        raise ValueError("n must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    eye = np.eye(n)
    return x * eye, (x + s) * eye, np.ones(n)


def tightness_ratio(n: int, x: float, s: float) -> float:
    """``|Delta L| / (s n)``, the gap relative to the bound on the tight instance."""
    if not s > 0:
        raise ValueError("s must be positive")
    X, Xt, beta = tightness_instance(n, x, s)
    return loss_gap(X, Xt, beta) / additive_bound(X, Xt, beta)
