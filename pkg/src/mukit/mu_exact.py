"""Exact mu_y(X) through a linear program over the range of ``A = D_y X``.

With ``z = A beta`` the program

    minimize 1^T z   subject to   ||z||_1 <= C,   z in range(A)

picks the direction whose negative mass most outweighs its positive
mass. Splitting ``z = z_plus - z_minus`` makes it an LP with 2n
nonnegative variables. Negating the optimal direction gives the supremum
of positive over negative mass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from mukit.core import SignedData, SplitMasses, split_masses, standardize
from mukit.lp_solver import OPTIMAL, LpError, LpProblem, solve_lp

SEP_TOL = 1e-9
OPT_TOL = 1e-8
RANGE_CUTOFF = 1e-10


@dataclass(frozen=True)
class RangeBasis:
    """Orthonormal bases of range(A) (``Q``) and its complement (``N``)."""

    Q: np.ndarray
    N: np.ndarray
    rank: int


@dataclass(frozen=True)
class MuResult:
    """Value of mu together with the direction that attains it.

    ``mu`` is ``inf`` for separable data; ``beta_star`` is then a direction
    with (numerically) no negative mass. ``budget`` is the l1 budget C of the
    LP, or None for results not produced by the LP.
    """

    mu: float
    beta_star: np.ndarray
    masses: SplitMasses
    budget: Optional[float] = None
    lp_objective: Optional[float] = None

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.mu))


def _signed(A: Union[SignedData, np.ndarray]) -> np.ndarray:
    if isinstance(A, SignedData):
        return A.A
    return standardize(A, np.ones(np.asarray(A).shape[0])).A


def orthonormal_range_basis(A: Union[SignedData, np.ndarray]) -> RangeBasis:
    A = _signed(A)
    U, s, _ = np.linalg.svd(A, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("range basis of a zero matrix is undefined")
    r = int(np.sum(s > RANGE_CUTOFF * s[0]))
    Q = np.ascontiguousarray(U[:, :r])
    N = np.ascontiguousarray(U[:, r:])
    Q.setflags(write=False)
    N.setflags(write=False)
    return RangeBasis(Q=Q, N=N, rank=r)


def build_mu_lp(A: Union[SignedData, np.ndarray], C: float = 1.0, basis: Optional[RangeBasis] = None) -> LpProblem:
    """LP over ``(z_plus, z_minus)``.

    Constraints: one budget row ``1^T(z_plus + z_minus) <= C``, the range
    condition ``N^T(z_plus - z_minus) = 0`` and nonnegativity of all 2n
    variables. ``N`` spans the orthogonal complement of range(A), so the
    range condition is the same as ``(I - QQ^T) z = 0`` with the n - rank
    redundant rows already removed.
    """
    if not C > 0:
        raise ValueError("budget C must be positive")
    A = _signed(A)
    basis = basis if basis is not None else orthonormal_range_basis(A)
    n = A.shape[0]
    Nt = basis.N.T
    ones = np.ones(n)
    return LpProblem(
        c=np.concatenate([ones, -ones]),
        A_eq=np.hstack([Nt, -Nt]),
        b_eq=np.zeros(Nt.shape[0]),
        A_ub=np.ones((1, 2 * n)),
        b_ub=[C],
    )


def _fallback_direction(A: np.ndarray) -> np.ndarray:
    _, _, Vt = np.linalg.svd(A, full_matrices=False)
    return Vt[0].copy()


def compute_mu_exact(X, y=None, C: float = 1.0) -> MuResult:
    """Exact mu_y(X). ``y=None`` means X is already the signed matrix."""
    A = standardize(X, np.ones(np.asarray(X).shape[0]) if y is None else y).A
    if not np.any(A):
        raise ValueError("mu is undefined for a zero data matrix")
    n = A.shape[0]
    lp = build_mu_lp(A, C)
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        # z = 0 is always feasible and the budget bounds the objective
        raise LpError(f"mu LP ended with status {sol.status}")
    z = sol.x[:n] - sol.x[n:]
    lp_value = float(sol.objective)

    if np.sum(np.abs(z)) <= 1e-12 * C or lp_value > -OPT_TOL * C:
        # 1^T z >= 0 on the whole range means 1^T z == 0 there: every
        # direction splits its mass evenly
        beta = _fallback_direction(A)
        masses = split_masses(A @ beta)
        return MuResult(mu=1.0, beta_star=beta, masses=masses, budget=C, lp_objective=lp_value)

    beta_lp, *_ = np.linalg.lstsq(A, z, rcond=None)
    beta = -beta_lp
    masses = split_masses(A @ beta)
    if masses.neg <= SEP_TOL * masses.total or lp_value <= -C + OPT_TOL * C:
        mu = np.inf
    else:
        mu = masses.pos / masses.neg
        if mu < 1.0:
            # only reachable through round-off on a balanced instance
            beta = -beta
            masses = SplitMasses(pos=masses.neg, neg=masses.pos)
            mu = masses.pos / masses.neg
    return MuResult(mu=float(mu), beta_star=beta, masses=masses, budget=C, lp_objective=lp_value)
