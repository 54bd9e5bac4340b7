"""Dense data types, loss functions and the positive/negative mass ratio."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

# above this argument log(1 + e^z) is evaluated as z + log1p(e^-z)
_SHIFT_THRESHOLD = 30.0


class DimensionError(ValueError):
    """Raised when array shapes do not agree."""


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a finite 2-d float array with n, d >= 1."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DimensionError(f"data matrix must be 2-d and nonempty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("data matrix contains non-finite entries")
    return X


def as_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != n:
        raise DimensionError(f"label vector has length {y.shape[0]}, expected {n}")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be exactly +1 or -1")
    return y


def as_param(beta, d: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != d:
        raise DimensionError(f"parameter vector has length {beta.shape[0]}, expected {d}")
    if not np.all(np.isfinite(beta)):
        raise ValueError("parameter vector contains non-finite entries")
    return beta


@dataclass(frozen=True)
class SignedData:
    """The matrix ``A = D_y X``; row i is ``y_i`` times row i of ``X``."""

    A: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class SplitMasses:
    pos: float
    neg: float

    @property
    def total(self) -> float:
        return self.pos + self.neg


def _matrix_of(A: Union[SignedData, np.ndarray]) -> np.ndarray:
    return A.A if isinstance(A, SignedData) else as_data_matrix(A)


def standardize(X, y) -> SignedData:
    X = as_data_matrix(X)
    y = as_labels(y, X.shape[0])
    A = y[:, None] * X
    A.setflags(write=False)
    return SignedData(A)


def softplus(z) -> np.ndarray:
    """Elementwise ``log(1 + e^z)`` without overflow."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z > _SHIFT_THRESHOLD
    out[big] = z[big] + np.log1p(np.exp(-z[big]))
    out[~big] = np.log1p(np.exp(z[~big]))
    return out


def logistic_loss(X, y, beta) -> float:
    """Sum of ``log(1 + exp(-y_i x_i^T beta))`` over the rows of ``X``."""
    X = as_data_matrix(X)
    y = as_labels(y, X.shape[0])
    beta = as_param(beta, X.shape[1])
    return float(np.sum(softplus(-y * (X @ beta))))


def relu_loss(X, beta) -> float:
    X = as_data_matrix(X)
    beta = as_param(beta, X.shape[1])
    return float(np.sum(np.maximum(X @ beta, 0.0)))


def split_masses(v) -> SplitMasses:
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return SplitMasses(pos=float(np.sum(np.maximum(v, 0.0))), neg=float(np.sum(np.maximum(-v, 0.0))))


def mass_ratio(m: SplitMasses) -> Optional[float]:
    """pos/neg with +inf for one-signed vectors and None for the zero vector."""
    if m.neg == 0.0:
        return None if m.pos == 0.0 else np.inf
    return m.pos / m.neg


def mu_ratio(A: Union[SignedData, np.ndarray], beta) -> Optional[float]:
    """Ratio of positive to negative l1 mass of ``A @ beta``.

    Returns ``inf`` when ``A @ beta`` has no negative entries and ``None``
    when ``A @ beta`` is identically zero (the ratio is undefined there).
    """
    A = _matrix_of(A)
    beta = as_param(beta, A.shape[1])
    if not np.any(beta):
        raise ValueError("mu_ratio is defined for nonzero beta only")
    return mass_ratio(split_masses(A @ beta))


def oriented_ratio(A: Union[SignedData, np.ndarray], beta) -> Optional[float]:
    """``max(mu_ratio(A, beta), mu_ratio(A, -beta))``; always >= 1 when defined."""
    r = mu_ratio(A, beta)
    if r is None:
        return None
    if r == 0.0:
        return np.inf
    return max(r, 1.0 / r)
