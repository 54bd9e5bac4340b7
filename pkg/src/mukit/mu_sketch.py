"""Sketch-based bounds on mu_y(X) from a well-conditioned basis.

Pipeline: a dense Cauchy sketch ``S A`` of ``A = D_y X``, a QR factorization
``S A = Q R``, the basis ``U = A R^-1`` and the quantity

    t = min_{||beta||_1 = 1} ||(U beta)^-||_1,

which yields the bracket ``1/t <= mu <= factor / t``.

Computing t exactly is NP-hard in d. It is the radius of the largest cube
centred at the origin that fits inside the zonotope ``{-U^T lam : 0 <= lam
<= 1}``. Three solvers are provided:

* ``solve_min_neg_mass``: the big-M mixed-integer program with M = 2,
* ``min_neg_mass_orthants``: one small LP per sign pattern of beta,
* ``min_neg_mass_descent``: a multi-start sign-descent heuristic for large d.
  It returns an achieved value, hence an upper bound on t.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg

from mukit.core import SignedData, as_data_matrix, standardize
from mukit.lp_solver import (
    INFEASIBLE,
    OPTIMAL,
    LpError,
    LpProblem,
    MilpProblem,
    solve_lp,
    solve_milp,
)

BIG_M = 2.0
MAX_MILP_BINARIES = 40
MAX_ORTHANT_DIM = 16
SEPARABLE_TOL = 1e-9
SKETCH_RETRIES = 3

_RANK_TOL = 1e-12


class RankDeficientSketchError(LpError):
    """The sketched matrix does not have full column rank."""


@dataclass(frozen=True)
class SketchConfig:
    """Sketch size, failure probability and seed of one sketching run.

    ``upper_factor`` overrides the multiplier that turns the lower bound
    into the upper bound; by default it is ``d * log(d / delta)``.
    ``solver`` chooses how t is computed: ``"milp"``, ``"orthants"``,
    ``"descent"`` or ``"auto"`` (exact up to ``exact_max_d`` columns, the
    heuristic beyond).
    """

    n_prime: int
    delta: float = 0.1
    seed: int = 0
    upper_factor: Optional[float] = None
    solver: str = "auto"
    exact_max_d: int = 10
    n_starts: int = 4

    def __post_init__(self):
        if int(self.n_prime) != self.n_prime or self.n_prime < 1:
            raise ValueError("n_prime must be a positive integer")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned value")
        if self.upper_factor is not None and not self.upper_factor >= 1.0:
            raise ValueError("upper_factor must be at least 1")
        if self.solver not in ("auto", "milp", "orthants", "descent"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be positive")

    def factor(self, d: int) -> float:
        if self.upper_factor is not None:
            return float(self.upper_factor)
        return max(1.0, d * math.log(d / self.delta))


@dataclass(frozen=True)
class NegMassSolution:
    """Minimiser of the negative mass over the l1 sphere.

    ``c``, ``d``, ``h`` and ``v`` are the auxiliary variables of the
    mixed-integer program (``h = |beta|`` and ``v`` marks nonnegative
    coordinates); they are reconstructed from ``beta`` for the other
    solvers. ``exact`` is False when ``t`` is only an achieved value.
    """

    t: float
    beta: np.ndarray
    c: np.ndarray
    d: np.ndarray
    h: np.ndarray
    v: np.ndarray
    exact: bool
    method: str
    lp_solves: int = 0


@dataclass(frozen=True)
class MuBounds:
    t: float
    lower: float
    upper: float
    basis_shape: tuple[int, int]
    alpha: float
    beta_bound: float
    exact: bool
    seed: int
    upper_factor: float
    method: str


def _signed(A: Union[SignedData, np.ndarray]) -> np.ndarray:
    return A.A if isinstance(A, SignedData) else as_data_matrix(A)


def cauchy_sketch(A: Union[SignedData, np.ndarray], cfg: SketchConfig) -> np.ndarray:
    """``S @ A`` with S of shape (n_prime, n), i.i.d. standard Cauchy / n_prime."""
    A = _signed(A)
    if cfg.n_prime < A.shape[1]:
        raise ValueError(f"n_prime={cfg.n_prime} is smaller than d={A.shape[1]}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg.seed))))
    S = rng.standard_cauchy((cfg.n_prime, A.shape[0])) / cfg.n_prime
    return S @ A


def well_conditioned_basis(A: Union[SignedData, np.ndarray], sketched) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(U, R)`` with ``sketched = Q R`` and ``U = A R^-1``."""
    A = _signed(A)
    sketched = as_data_matrix(sketched)
    if sketched.shape[1] != A.shape[1]:
        raise ValueError("sketch and data have different column counts")
    R = scipy.linalg.qr(sketched, mode="r")[0][: A.shape[1]]
    diag = np.abs(np.diag(R))
    if diag.size < A.shape[1] or diag.min() <= _RANK_TOL * max(diag.max(), 1e-300):
        raise RankDeficientSketchError("sketched matrix is rank deficient")
    U = scipy.linalg.solve_triangular(R, A.T, trans="T").T
    return U, R


def _aux_from_beta(beta: np.ndarray):
    h = np.abs(beta)
    v = (beta >= 0).astype(float)
    return h + beta, h - beta, h, v


def _neg_mass(U: np.ndarray, beta: np.ndarray) -> float:
    return float(np.sum(np.maximum(-(U @ beta), 0.0)))


def _normalised(U: np.ndarray, beta: np.ndarray, method: str, exact: bool, solves: int) -> NegMassSolution:
    beta = beta / np.sum(np.abs(beta))
    c, d, h, v = _aux_from_beta(beta)
    return NegMassSolution(
        t=_neg_mass(U, beta), beta=beta, c=c, d=d, h=h, v=v, exact=exact, method=method, lp_solves=solves
    )


def _check_basis(U) -> np.ndarray:
    U = as_data_matrix(U)
    if not np.any(U):
        raise ValueError("basis matrix is zero")
    return U


def nonneg_direction(U) -> Optional[np.ndarray]:
    """A nonzero beta with ``U beta >= 0`` and ``U beta != 0``, or None.

    By Stiemke's alternative such a beta exists exactly when no strictly
    positive lam has ``U^T lam = 0``. The LP maximises the smallest entry
    of such a lam; its row duals give beta when the optimum is zero.
    """
    U = _check_basis(U)
    n, d = U.shape
    # lam = mu + eps * 1 with 0 <= mu <= 1, 0 <= eps <= 1
    A_eq = np.hstack([U.T, U.sum(axis=0)[:, None]])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    sol = solve_lp(LpProblem(c=c, A_eq=A_eq, b_eq=np.zeros(d), ub=np.ones(n + 1)))
    if sol.status != OPTIMAL:
        raise LpError(f"separability LP ended with status {sol.status}")
    if -sol.objective > SEPARABLE_TOL:
        return None
    # the phase-two duals of an eps = 0 optimum are a separating direction;
    # confirm with a direct LP in case the basis is degenerate
    for beta in (sol.eq_duals, -sol.eq_duals):
        z = U @ beta
        if np.any(z > 0) and np.all(z >= -SEPARABLE_TOL * np.abs(z).max()):
            return np.asarray(beta, dtype=float)
    sol2 = solve_lp(
        LpProblem(
            c=np.zeros(d),
            A_ub=-U,
            b_ub=np.zeros(n),
            A_eq=U.sum(axis=0)[None, :],
            b_eq=[1.0],
            lb=np.full(d, -np.inf),
        )
    )
    if sol2.status == INFEASIBLE:
        return None
    return np.asarray(sol2.x, dtype=float)


def build_min_neg_mass_milp(U, M: float = BIG_M) -> MilpProblem:
    """Variables ``[beta, c, d, h, v, b]``; minimise ``sum(b)``.

    ``b >= -U beta``, ``h = c - beta``, ``h = d + beta``, ``c <= M v``,
    ``d <= M (1 - v)``, ``sum(h) >= 1``, ``v`` binary, all but beta >= 0.
    """
    U = _check_basis(U)
    n, d = U.shape
    I = np.eye(d)
    nv = 5 * d + n
    sl = {name: slice(k * d, (k + 1) * d) for k, name in enumerate("beta c d h v".split())}
    sl["b"] = slice(5 * d, nv)

    A_eq = np.zeros((2 * d, nv))
    A_eq[:d, sl["h"]] = I
    A_eq[:d, sl["c"]] = -I
    A_eq[:d, sl["beta"]] = I
    A_eq[d:, sl["h"]] = I
    A_eq[d:, sl["d"]] = -I
    A_eq[d:, sl["beta"]] = -I

    A_ub = np.zeros((n + 2 * d + 1, nv))
    A_ub[:n, sl["beta"]] = -U
    A_ub[:n, sl["b"]] = -np.eye(n)
    A_ub[n : n + d, sl["c"]] = I
    A_ub[n : n + d, sl["v"]] = -M * I
    A_ub[n + d : n + 2 * d, sl["d"]] = I
    A_ub[n + d : n + 2 * d, sl["v"]] = M * I
    A_ub[-1, sl["h"]] = -1.0
    b_ub = np.concatenate([np.zeros(n), np.zeros(d), np.full(d, M), [-1.0]])

    c = np.zeros(nv)
    c[sl["b"]] = 1.0
    lb = np.zeros(nv)
    lb[sl["beta"]] = -np.inf
    ub = np.full(nv, np.inf)
    ub[sl["v"]] = 1.0
    base = LpProblem(c=c, A_eq=A_eq, b_eq=np.zeros(2 * d), A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub)
    return MilpProblem(base=base, binary=tuple(range(4 * d, 5 * d)))


def solve_min_neg_mass(U, *, node_limit: int = 200_000) -> NegMassSolution:
    """Exact t through branch-and-bound on the big-M program (M = 2)."""
    U = _check_basis(U)
    n, d = U.shape
    if d > MAX_MILP_BINARIES:
        raise ValueError(f"at most {MAX_MILP_BINARIES} columns supported, got {d}")
    sol = solve_milp(build_min_neg_mass_milp(U))
    if sol.status != OPTIMAL:
        raise LpError(f"negative-mass program ended with status {sol.status}")
    x = sol.x
    beta = np.array(x[:d])
    parts = [np.array(x[k * d : (k + 1) * d]) for k in range(1, 5)]
    total = float(np.sum(parts[2]))
    if total > 1.0 + 1e-9:
        # only reachable when t = 0: scale back onto the sphere
        beta = beta / total
        parts = [p / total for p in parts[:3]] + [parts[3]]
    return NegMassSolution(
        t=max(float(np.sum(x[5 * d :])), 0.0) if total <= 1.0 + 1e-9 else _neg_mass(U, beta),
        beta=beta,
        c=parts[0],
        d=parts[1],
        h=parts[2],
        v=np.round(parts[3]),
        exact=True,
        method="milp",
        lp_solves=sol.nodes,
    )


def _orthant_lp(U: np.ndarray, s: np.ndarray, restrict: bool) -> tuple[float, np.ndarray]:
    """``min ||(U beta)^-||_1`` subject to ``s^T beta = 1`` (and ``s_i beta_i >= 0``).

    Solved through its dual ``max tau`` subject to
    ``U^T lam + tau s (+ diag(s) nu) = 0``, ``0 <= lam <= 1``, ``nu >= 0``,
    which has only d rows. Returns the optimum and a primal beta taken
    from the row duals.
    """
    n, d = U.shape
    cols = [U.T, s[:, None]]
    if restrict:
        cols.append(np.diag(s))
    A_eq = np.hstack(cols)
    nv = A_eq.shape[1]
    c = np.zeros(nv)
    c[n] = -1.0
    lb = np.zeros(nv)
    lb[n] = -np.inf
    ub = np.full(nv, np.inf)
    ub[:n] = 1.0
    sol = solve_lp(LpProblem(c=c, A_eq=A_eq, b_eq=np.zeros(d), lb=lb, ub=ub))
    if sol.status != OPTIMAL:
        raise LpError(f"orthant LP ended with status {sol.status}")
    return -sol.objective, -np.asarray(sol.eq_duals)


def min_neg_mass_orthants(U) -> NegMassSolution:
    """Exact t as the minimum over all 2^(d-1) sign patterns (s and -s
    give different programs, so all 2^d patterns are solved)."""
    U = _check_basis(U)
    d = U.shape[1]
    if d > MAX_ORTHANT_DIM:
        raise ValueError(f"orthant enumeration limited to d <= {MAX_ORTHANT_DIM}")
    best_val, best_beta, solves = np.inf, None, 0
    for signs in itertools.product((1.0, -1.0), repeat=d):
        s = np.array(signs)
        val, beta = _orthant_lp(U, s, restrict=True)
        solves += 1
        if val < best_val:
            best_val, best_s, best_beta = val, s, beta
    beta = _polish(U, best_s, best_beta)
    sol = _normalised(U, beta, "orthants", True, solves)
    return _with_value(sol, min(best_val, sol.t))


def _with_value(sol: NegMassSolution, t: float) -> NegMassSolution:
    return NegMassSolution(**{**sol.__dict__, "t": max(float(t), 0.0)})


def _polish(U: np.ndarray, s: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Project a dual-derived beta onto the orthant of ``s``; fall back to
    ``s`` itself if that leaves nothing."""
    beta = np.where(s * beta >= 0, beta, 0.0)
    if not np.any(beta):
        return s.copy()
    return beta


def min_neg_mass_descent(U, *, n_starts: int = 4, seed: int = 0, max_rounds: int = 100) -> NegMassSolution:
    """Multi-start sign descent; ``t`` is an achieved value, so >= the true t.

    From a sign vector s, solve ``min f(beta)`` subject to ``s^T beta = 1``
    (no orthant restriction). The minimiser scaled to the unit l1 sphere is
    feasible for ``s' = sign(beta)`` with a value no larger, so repeating
    with s' never increases the objective. At a fixed point the signs of
    zero coordinates are flipped one at a time before stopping.
    """
    U = _check_basis(U)
    n, d = U.shape
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    starts = [np.sign(U.sum(axis=0) + (U.sum(axis=0) == 0))]
    _, _, Vt = np.linalg.svd(U, full_matrices=False)
    starts += [np.where(Vt[0] >= 0, 1.0, -1.0), np.where(Vt[0] >= 0, -1.0, 1.0)]
    while len(starts) < n_starts:
        starts.append(rng.choice([-1.0, 1.0], size=d))

    best_val, best_beta, solves = np.inf, None, 0
    for s in starts[:n_starts]:
        seen = set()
        for _ in range(max_rounds):
            key = s.tobytes()
            if key in seen:
                break
            seen.add(key)
            _, beta = _orthant_lp(U, s, restrict=False)
            solves += 1
            if not np.any(beta):
                break
            val = _neg_mass(U, beta) / np.sum(np.abs(beta))
            if val < best_val - 1e-15:
                best_val, best_beta = val, beta
            scale = np.abs(beta).max()
            zero = np.abs(beta) <= 1e-12 * scale
            s_new = np.where(zero, s, np.sign(beta))
            if np.array_equal(s_new, s):
                improved = False
                for i in np.flatnonzero(zero):
                    trial = s.copy()
                    trial[i] = -trial[i]
                    if trial.tobytes() in seen:
                        continue
                    _, b2 = _orthant_lp(U, trial, restrict=False)
                    solves += 1
                    if np.any(b2) and _neg_mass(U, b2) / np.sum(np.abs(b2)) < val - 1e-12 * max(val, 1e-300):
                        s_new = trial
                        improved = True
                        break
                if not improved:
                    break
            s = s_new
        if best_val == 0.0:
            break
    if best_beta is None:
        best_beta = starts[0]
    return _normalised(U, best_beta, "descent", False, solves)


def _l1_regression_dual(U: np.ndarray, j: int, iters: int = 60) -> float:
    """Certified lower bound on ``min_{beta_j = 1} ||U beta||_1``.

    Iteratively reweighted least squares gives a near-optimal residual r.
    Clipping ``r / tau`` to [-1, 1] and projecting out every coordinate of
    ``U^T lam`` but the j-th yields lam with ``U^T lam = g e_j``. Weak
    duality then gives ``||U beta||_1 >= g / ||lam||_inf`` for every beta
    with ``beta_j = 1``.
    """
    n, d = U.shape
    u = U[:, j]
    V = np.delete(U, j, axis=1)
    if V.shape[1]:
        gam = -np.linalg.lstsq(V, u, rcond=None)[0]
        r = u + V @ gam
        eps = np.abs(r).max()
        for _ in range(iters):
            w = 1.0 / np.maximum(np.abs(r), eps)
            Vw = V * w[:, None]
            gam = -np.linalg.solve(V.T @ Vw, Vw.T @ u)
            r = u + V @ gam
            eps = max(0.5 * eps, 1e-12 * np.abs(r).max())
    else:
        r = u.copy()
    # about d residuals vanish at an optimum; scale the rest to +-1
    tau = np.sort(np.abs(r))[min(d, n - 1)]
    lam = np.clip(r / tau, -1.0, 1.0) if tau > 0 else np.sign(r)
    g = U.T @ lam
    g[j] = 0.0
    lam = lam - U @ np.linalg.solve(U.T @ U, g)
    top = np.abs(lam).max()
    return float((U[:, j] @ lam) / top) if top > 0 else 0.0


def linf_l1_constant(U, *, exact: bool = False) -> float:
    """A constant ``kappa`` with ``||beta||_inf <= kappa ||U beta||_1`` for all beta.

    The smallest such constant is ``1 / min_j min_{beta_j = 1} ||U beta||_1``.
    With ``exact=True`` each inner l1 regression is solved as the LP
    ``max w`` subject to ``U^T lam = w e_j``, ``-1 <= lam <= 1``; otherwise
    a dual certificate from reweighted least squares is used, which is
    never smaller than the exact constant and typically within a few
    percent of it.
    """
    U = _check_basis(U)
    n, d = U.shape
    smallest = np.inf
    if exact:
        c = np.zeros(n + 1)
        c[-1] = -1.0
        lb = np.concatenate([-np.ones(n), [-np.inf]])
        ub = np.concatenate([np.ones(n), [np.inf]])
        for j in range(d):
            e = np.zeros((d, 1))
            e[j] = -1.0
            sol = solve_lp(LpProblem(c=c, A_eq=np.hstack([U.T, e]), b_eq=np.zeros(d), lb=lb, ub=ub))
            if sol.status != OPTIMAL:
                raise LpError(f"l1 regression LP ended with status {sol.status}")
            smallest = min(smallest, -sol.objective)
    else:
        if np.linalg.matrix_rank(U) < d:
            return np.inf
        for j in range(d):
            smallest = min(smallest, _l1_regression_dual(U, j))
    return np.inf if smallest <= 0 else 1.0 / smallest


def normalise_basis(U) -> tuple[np.ndarray, float, float]:
    """Scale U so that ``||U beta||_1 >= 2 ||beta||_1`` for every beta.

    With ``kappa`` from :func:`linf_l1_constant`,
    ``||U beta||_1 >= ||beta||_inf / kappa >= ||beta||_1 / (d kappa)``, so
    the factor ``2 d kappa`` suffices. At that scale ``1/t`` is a lower
    bound on mu: the minimiser beta* has ``pos + neg >= 2`` and ``neg = t
    <= (pos + neg) / 2``, hence ``pos / neg >= 2 / t - 1 >= 1 / t``.
    Returns the scaled basis, the factor and ``kappa``.
    """
    U = _check_basis(U)
    kappa = linf_l1_constant(U)
    if not np.isfinite(kappa):
        raise RankDeficientSketchError("basis has a nontrivial null space")
    scale = 2.0 * U.shape[1] * kappa
    return U * scale, scale, kappa


def column_l1_sum(U) -> float:
    """``alpha = sum_j ||U e_j||_1``."""
    return float(np.abs(np.asarray(U)).sum())


def min_neg_mass(U, cfg: SketchConfig) -> NegMassSolution:
    U = _check_basis(U)
    d = U.shape[1]
    method = cfg.solver
    if method == "auto":
        method = "milp" if d <= 3 else ("orthants" if d <= cfg.exact_max_d else "descent")
    beta = nonneg_direction(U)
    if beta is not None:
        sol = _normalised(U, beta, method, True, 2)
        return _with_value(sol, 0.0)
    if method == "milp":
        return solve_min_neg_mass(U)
    if method == "orthants":
        return min_neg_mass_orthants(U)
    return min_neg_mass_descent(U, n_starts=cfg.n_starts, seed=cfg.seed)


def approx_mu_bounds(X, y, cfg: SketchConfig) -> MuBounds:
    """Bracket mu_y(X) between ``1/t`` and ``factor/t``.

    A rank-deficient sketch is retried with seeds ``seed + 1``, ``seed + 2``
    before the error is raised.
    """
    A = standardize(X, y)
    n, d = A.shape
    last_err = None
    for attempt in range(SKETCH_RETRIES):
        run = SketchConfig(**{**cfg.__dict__, "seed": (int(cfg.seed) + attempt) % 2**64})
        try:
            U, _ = well_conditioned_basis(A, cauchy_sketch(A, run))
        except RankDeficientSketchError as err:
            last_err = err
            continue
        if nonneg_direction(U) is not None:
            sol, Un, kappa = None, U, linf_l1_constant(U)
            t, exact, method = 0.0, True, "separable"
        else:
            Un, _, kappa = normalise_basis(U)
            sol = min_neg_mass(Un, run)
            t, exact, method = sol.t, sol.exact, sol.method
        factor = cfg.factor(d)
        if t <= 0.0:
            lower = upper = np.inf
        else:
            lower = 1.0 / t
            upper = lower * factor
        return MuBounds(
            t=t,
            lower=lower,
            upper=upper,
            basis_shape=Un.shape,
            alpha=column_l1_sum(Un),
            beta_bound=kappa,
            exact=exact,
            seed=run.seed,
            upper_factor=factor,
            method=method,
        )
    raise last_err
