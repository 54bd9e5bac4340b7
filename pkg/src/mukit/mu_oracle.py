"""Brute-force mu_y(X) for toy instances, used as a test oracle.

The ratio of positive to negative mass is linear-fractional on every cone
of the hyperplane arrangement {beta : a_i^T beta = 0}, so its supremum is
attained on an extreme ray of some cone. Once A is reduced to full column
rank r, every extreme ray is the null line of r - 1 linearly independent
rows. Enumerating those lines, both orientations, is exact; coordinate
and random directions are added as a cross-check.
"""

from __future__ import annotations

import itertools

import numpy as np

from mukit.core import SplitMasses, standardize
from mukit.mu_exact import MuResult

MAX_ROWS = 12
MAX_COLS = 4
N_RANDOM = 10_000

# entries of A @ beta below this fraction of the largest are treated as zero
_CLEAN_TOL = 1e-10


class OracleSizeError(ValueError):
    pass


def _vertex_directions(A: np.ndarray) -> np.ndarray:
    _, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > 1e-10 * s[0]))
    V = Vt[:r].T  # d x r, orthonormal basis of the row space
    Ar = A @ V
    dirs = []
    if r == 1:
        dirs.append(np.ones(1))
    else:
        for rows in itertools.combinations(range(A.shape[0]), r - 1):
            _, sv, wt = np.linalg.svd(Ar[list(rows)])
            if sv[-1] <= 1e-10 * max(sv[0], 1.0):
                continue
            dirs.append(wt[-1])
    if not dirs:
        return np.zeros((A.shape[1], 0))
    return V @ np.array(dirs).T


def mu_bruteforce(X, y=None, *, n_random: int = N_RANDOM, seed: int = 0) -> MuResult:
    """Enumerate candidate directions and return the largest oriented ratio."""
    X = np.asarray(X, dtype=float)
    A = standardize(X, np.ones(X.shape[0]) if y is None else y).A
    n, d = A.shape
    if n > MAX_ROWS or d > MAX_COLS:
        raise OracleSizeError(f"oracle limited to n <= {MAX_ROWS}, d <= {MAX_COLS}; got {n} x {d}")
    if not np.any(A):
        raise ValueError("mu is undefined for a zero data matrix")

    rng = np.random.default_rng(seed)
    cand = np.hstack([
        _vertex_directions(A),
        np.eye(d),
        rng.standard_normal((d, n_random)),
    ])
    cand = np.hstack([cand, -cand])
    Z = A @ cand
    scale = np.abs(Z).max(axis=0)
    keep = scale > 0
    Z, cand, scale = Z[:, keep], cand[:, keep], scale[keep]
    Z = np.where(np.abs(Z) <= _CLEAN_TOL * scale, 0.0, Z)
    pos = np.maximum(Z, 0.0).sum(axis=0)
    neg = np.maximum(-Z, 0.0).sum(axis=0)
    with np.errstate(divide="ignore"):
        ratio = np.where(neg > 0, pos / np.where(neg > 0, neg, 1.0), np.inf)
    k = int(np.argmax(ratio))
    return MuResult(
        mu=float(ratio[k]),
        beta_star=cand[:, k].copy(),
        masses=SplitMasses(pos=float(pos[k]), neg=float(neg[k])),
    )
