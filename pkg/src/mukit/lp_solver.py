"""Dense bounded-variable revised simplex and a binary branch-and-bound.

Problems are stated as::

    minimize    c @ x
    subject to  A_eq @ x == b_eq
                A_ub @ x <= b_ub
                lb <= x <= ub

Bounds default to ``0 <= x < inf`` (the scipy ``linprog`` convention);
pass ``-np.inf``/``np.inf`` for free variables.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
RANK_TOL = 1e-9
EMPTY_ROW_TOL = 1e-13

# variable states
_BASIC, _LOWER, _UPPER, _FREE, _FIXED = 0, 1, 2, 3, 4


class LpError(RuntimeError):
    """Base class for solver failures (never a silently wrong answer)."""


class IterationLimitError(LpError):
    pass


class NodeLimitError(LpError):
    """Branch-and-bound stopped before proving optimality.

    ``incumbent`` holds the best integral solution found so far (or None)
    and ``bound`` the smallest open relaxation bound.
    """

    def __init__(self, message: str, incumbent: Optional["LpSolution"] = None, bound: float = -np.inf):
        super().__init__(message)
        self.incumbent = incumbent
        self.bound = bound


def _as_2d(M, ncols: int, name: str) -> np.ndarray:
    if M is None:
        return np.zeros((0, ncols))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != ncols:
        raise ValueError(f"{name} has {M.shape[1]} columns, expected {ncols}")
    return M


def _as_1d(v, size: int, name: str) -> np.ndarray:
    if v is None:
        return np.zeros(size)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != size:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {size}")
    return v


@dataclass(frozen=True)
class LpProblem:
    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = c.shape[0]
        if n == 0:
            raise ValueError("problem has no variables")
        A_eq = _as_2d(self.A_eq, n, "A_eq")
        b_eq = _as_1d(self.b_eq, A_eq.shape[0], "b_eq")
        A_ub = _as_2d(self.A_ub, n, "A_ub")
        b_ub = _as_1d(self.b_ub, A_ub.shape[0], "b_ub")
        lb = np.zeros(n) if self.lb is None else _as_1d(self.lb, n, "lb")
        ub = np.full(n, np.inf) if self.ub is None else _as_1d(self.ub, n, "ub")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite coefficients")
        if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb == np.inf) or np.any(ub == -np.inf):
            raise ValueError("invalid variable bounds")
        if np.any(lb > ub):
            raise ValueError("lower bound exceeds upper bound")
        for name, arr in (("c", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub),
                          ("b_ub", b_ub), ("lb", lb), ("ub", ub)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    def violation(self, x) -> float:
        """Largest constraint or bound violation of ``x``, rows scaled to unit inf-norm."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.A_eq.shape[0]:
            s = np.maximum(np.abs(self.A_eq).max(axis=1), 1e-300)
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq) / s)))
        if self.A_ub.shape[0]:
            s = np.maximum(np.abs(self.A_ub).max(axis=1), 1e-300)
            worst = max(worst, float(np.max((self.A_ub @ x - self.b_ub) / s)))
        worst = max(worst, float(np.max(self.lb - x)), float(np.max(x - self.ub)))
        return max(worst, 0.0)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    iterations: int = 0
    eq_duals: Optional[np.ndarray] = None
    ub_duals: Optional[np.ndarray] = None
    nodes: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class MilpProblem:
    base: LpProblem
    binary: tuple = field(default_factory=tuple)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.binary)
        if len(set(idx)) != len(idx) or any(i < 0 or i >= self.base.n_vars for i in idx):
            raise ValueError("binary index set contains invalid or repeated indices")
        object.__setattr__(self, "binary", idx)


class _Simplex:
    """Working state of one solve. Not reusable, not thread-safe."""

    def __init__(self, problem: LpProblem, max_iter: Optional[int]):
        self.p = problem
        self.max_iter = max_iter
        self.iterations = 0

    # -- setup ---------------------------------------------------------

    def _standard_form(self) -> Optional[str]:
        p = self.p
        n = p.n_vars
        self.n = n
        eq_scale = np.abs(p.A_eq).max(axis=1) if p.A_eq.shape[0] else np.zeros(0)
        ub_scale = np.abs(p.A_ub).max(axis=1) if p.A_ub.shape[0] else np.zeros(0)

        # rows that are empty up to round-off carry no variables; check
        # them and drop them rather than blow their noise up by scaling
        zero_eq = eq_scale <= EMPTY_ROW_TOL * (eq_scale.max() if eq_scale.size else 0.0)
        if np.any(np.abs(p.b_eq[zero_eq]) > FEAS_TOL):
            return INFEASIBLE
        zero_ub = ub_scale <= EMPTY_ROW_TOL * (ub_scale.max() if ub_scale.size else 0.0)
        if np.any(p.b_ub[zero_ub] < -FEAS_TOL):
            return INFEASIBLE

        eq_rows = np.flatnonzero(~zero_eq)
        E = p.A_eq[eq_rows] / eq_scale[eq_rows, None]
        f = p.b_eq[eq_rows] / eq_scale[eq_rows]
        eq_rows, E, f, status = self._drop_dependent(eq_rows, E, f)
        if status is not None:
            return status

        ub_rows = np.flatnonzero(~zero_ub)
        G = p.A_ub[ub_rows] / ub_scale[ub_rows, None]
        h = p.b_ub[ub_rows] / ub_scale[ub_rows]

        me, mu = len(eq_rows), len(ub_rows)
        m = me + mu
        A = np.zeros((m, n + mu))
        A[:me, :n] = E
        A[me:, :n] = G
        A[me:, n:] = np.eye(mu)
        self.A = A
        self.b = np.concatenate([f, h])
        self.lb = np.concatenate([p.lb, np.zeros(mu)])
        self.ub = np.concatenate([p.ub, np.full(mu, np.inf)])
        self.m = m
        self.eq_rows, self.ub_rows = eq_rows, ub_rows
        self.row_scale = np.concatenate([eq_scale[eq_rows], ub_scale[ub_rows]])
        self.n_struct = n + mu
        return None

    @staticmethod
    def _drop_dependent(rows, E, f):
        if E.shape[0] == 0:
            return rows, E, f, None
        _, R, perm = scipy.linalg.qr(E.T, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > RANK_TOL * max(diag[0], 1.0)))
        if rank == E.shape[0]:
            return rows, E, f, None
        keep = np.sort(perm[:rank])
        drop = np.sort(perm[rank:])
        if rank == 0:
            if np.any(np.abs(f) > FEAS_TOL):
                return rows, E, f, INFEASIBLE
            return rows[keep], E[keep], f[keep], None
        W, *_ = np.linalg.lstsq(E[keep].T, E[drop].T, rcond=None)
        if np.any(np.abs(W.T @ f[keep] - f[drop]) > 1e-7 * (1.0 + np.abs(f[drop]))):
            return rows, E, f, INFEASIBLE
        return rows[keep], E[keep], f[keep], None

    def _initial_basis(self):
        lb, ub = self.lb, self.ub
        N = self.n_struct
        x = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
        state = np.where(np.isfinite(lb), _LOWER, np.where(np.isfinite(ub), _UPPER, _FREE))
        state[lb == ub] = _FIXED
        residual = self.b - self.A @ x
        me = len(self.eq_rows)
        basis = np.empty(self.m, dtype=int)
        art_cols, art_rows = [], []
        for i in range(self.m):
            if i >= me and residual[i] >= -FEAS_TOL:
                basis[i] = self.n + (i - me)
            else:
                sign = 1.0 if residual[i] >= 0 else -1.0
                col = np.zeros(self.m)
                col[i] = sign
                art_cols.append(col)
                art_rows.append(i)
                basis[i] = N + len(art_cols) - 1
        n_art = len(art_cols)
        if n_art:
            self.A = np.hstack([self.A, np.array(art_cols).T])
        self.lb = np.concatenate([lb, np.zeros(n_art)])
        self.ub = np.concatenate([ub, np.full(n_art, np.inf)])
        self.x = np.concatenate([x, np.zeros(n_art)])
        self.state = np.concatenate([state, np.full(n_art, _BASIC)])
        self.state[basis] = _BASIC
        self.basis = basis
        self.n_art = n_art
        self._refactor()

    # -- linear algebra --------------------------------------------------

    def _refactor(self):
        B = self.A[:, self.basis]
        # Fortran order lets dger update the inverse in place
        self.Binv = np.asfortranarray(np.linalg.inv(B))
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.Binv @ (self.b - self.A @ xn)
        self.since_refactor = 0

    # -- iterations --------------------------------------------------------

    def _run(self, cost: np.ndarray, allow_unbounded: bool) -> str:
        A = self.A
        total = A.shape[0] + A.shape[1]
        stall_limit = 3 * total
        refactor_every = max(100, self.m // 8)
        cmax = max(1.0, float(np.max(np.abs(cost))))
        opt_tol = OPT_TOL * cmax
        max_iter = self.max_iter if self.max_iter is not None else max(20000, 50 * total)
        best = np.inf
        stalled = 0
        bland = False
        d = None
        while True:
            if self.since_refactor >= refactor_every:
                self._refactor()
                d = None
            if d is None:
                # a bound flip leaves the basis and so the reduced costs unchanged
                y = cost[self.basis] @ self.Binv
                d = cost - y @ A
            st = self.state
            inc = ((st == _LOWER) | (st == _FREE)) & (d < -opt_tol)
            dec = ((st == _UPPER) | (st == _FREE)) & (d > opt_tol)
            elig = inc | dec
            if not elig.any():
                if self.since_refactor == 0:
                    return OPTIMAL
                # confirm with a fresh factorization before declaring optimality
                self._refactor()
                d = None
                continue
            if self.iterations >= max_iter:
                raise IterationLimitError(f"simplex exceeded {max_iter} iterations")
            self.iterations += 1
            if bland:
                q = int(np.flatnonzero(elig)[0])
            else:
                q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            direction = 1.0 if inc[q] else -1.0
            w = self.Binv @ A[:, q]
            delta = -direction * w
            r, theta, flip = self._ratio_test(q, delta, bland)
            if r is None and not flip:
                if allow_unbounded:
                    return UNBOUNDED
                raise LpError("phase-1 problem reported unbounded")
            self._update(q, r, theta, flip, direction, delta, w)
            if not flip:
                d = None

            obj = float(cost @ self.x)
            if obj < best - 1e-12 * (1.0 + abs(best) if np.isfinite(best) else 1.0):
                best = obj
                stalled = 0
            else:
                stalled += 1
                if stalled > stall_limit:
                    bland = True

    def _ratio_test(self, q, delta, bland):
        basis = self.basis
        xb = self.x[basis]
        down = delta < -PIVOT_TOL
        moving = down | (delta > PIVOT_TOL)
        # distance to the bound each basic variable moves towards (may be inf)
        gap = np.where(down, xb - self.lb[basis], self.ub[basis] - xb)
        step = np.where(moving, np.abs(delta), 1.0)
        exact = np.where(moving, gap / step, np.inf)
        span = self.ub[q] - self.lb[q]
        if bland:
            theta_row = float(exact.min()) if self.m else np.inf
            if not np.isfinite(theta_row) and not np.isfinite(span):
                return None, np.inf, False
            if span <= theta_row:
                return None, span, True
            ties = np.flatnonzero(exact <= theta_row + 1e-12)
            r = int(ties[np.argmin(basis[ties])])
            return r, max(theta_row, 0.0), False
        relaxed = np.where(moving, (gap + FEAS_TOL) / step, np.inf)
        theta_max = float(relaxed.min()) if self.m else np.inf
        if not np.isfinite(theta_max) and not np.isfinite(span):
            return None, np.inf, False
        if span <= theta_max:
            return None, span, True
        cand = np.flatnonzero(exact <= theta_max)
        r = int(cand[np.argmax(np.abs(delta[cand]))])
        return r, max(float(exact[r]), 0.0), False

    def _update(self, q, r, theta, flip, direction, delta, w):
        if theta > 0:
            self.x[self.basis] += theta * delta
        if flip:
            if direction > 0:
                self.x[q], self.state[q] = self.ub[q], _UPPER
            else:
                self.x[q], self.state[q] = self.lb[q], _LOWER
            return
        self.x[q] += direction * theta
        leaving = self.basis[r]
        if delta[r] < 0:
            self.x[leaving] = self.lb[leaving]
        else:
            self.x[leaving] = self.ub[leaving]
        if self.lb[leaving] == self.ub[leaving]:
            self.state[leaving] = _FIXED
        else:
            self.state[leaving] = _LOWER if delta[r] < 0 else _UPPER
        self.basis[r] = q
        self.state[q] = _BASIC
        Binv = self.Binv
        pivot_row = Binv[r] / w[r]
        w = w.copy()
        w[r] -= 1.0
        self.Binv = dger(-1.0, w, pivot_row, a=Binv, overwrite_a=1)
        self.since_refactor += 1

    # -- driver --------------------------------------------------------------

    def solve(self) -> LpSolution:
        status = self._standard_form()
        if status is not None:
            return LpSolution(status=status)
        self._initial_basis()
        N = self.n_struct
        if self.n_art:
            cost1 = np.zeros(self.A.shape[1])
            cost1[N:] = 1.0
            if float(np.sum(self.x[N:])) > FEAS_TOL:
                self._run(cost1, allow_unbounded=False)
            infeas = float(np.sum(np.abs(self.x[N:])))
            if infeas > 1e-8 * max(1.0, float(np.max(np.abs(self.b), initial=0.0))):
                return LpSolution(status=INFEASIBLE, iterations=self.iterations)
            art = np.arange(N, self.A.shape[1])
            self.lb[art] = 0.0
            self.ub[art] = 0.0
            self.state[art[self.state[art] != _BASIC]] = _FIXED
            self.x[art[self.state[art] == _FIXED]] = 0.0
        cost = np.zeros(self.A.shape[1])
        cost[: self.n] = self.p.c
        status = self._run(cost, allow_unbounded=True)
        if status == UNBOUNDED:
            return LpSolution(status=UNBOUNDED, iterations=self.iterations)
        x = np.clip(self.x[: self.n], self.p.lb, self.p.ub)
        y = (cost[self.basis] @ self.Binv) / self.row_scale
        me = len(self.eq_rows)
        eq_duals = np.zeros(self.p.A_eq.shape[0])
        eq_duals[self.eq_rows] = y[:me]
        ub_duals = np.zeros(self.p.A_ub.shape[0])
        ub_duals[self.ub_rows] = y[me:]
        x.setflags(write=False)
        return LpSolution(
            status=OPTIMAL,
            x=x,
            objective=float(self.p.c @ x),
            iterations=self.iterations,
            eq_duals=eq_duals,
            ub_duals=ub_duals,
        )


def solve_lp(problem: LpProblem, *, max_iter: Optional[int] = None) -> LpSolution:
    """Solve ``problem`` to optimality or report infeasible/unbounded.

    Raises :class:`IterationLimitError` when ``max_iter`` pivots are exceeded.
    """
    return _Simplex(problem, max_iter).solve()


def solve_milp(
    problem: MilpProblem,
    *,
    node_limit: int = 100_000,
    int_tol: float = 1e-7,
) -> LpSolution:
    """Best-first branch-and-bound over the binary variables of ``problem``.

    Each node is an LP relaxation with some binaries fixed through their
    bounds; the most fractional binary is branched on. Integral leaves are
    re-solved with all binaries fixed so the reported point is exactly
    integral. Raises :class:`NodeLimitError` past ``node_limit`` relaxations.
    """
    base = problem.base
    B = np.array(problem.binary, dtype=int)
    lb = base.lb.copy()
    ub = base.ub.copy()
    if B.size:
        lb[B] = np.maximum(lb[B], 0.0)
        ub[B] = np.minimum(ub[B], 1.0)
        if np.any(lb[B] > ub[B]):
            return LpSolution(status=INFEASIBLE)
    counter = itertools.count()
    nodes = 0
    iterations = 0
    incumbent: Optional[LpSolution] = None
    heap = [(-np.inf, next(counter), lb, ub)]
    while heap:
        bound, _, nlb, nub = heapq.heappop(heap)
        if incumbent is not None and bound >= incumbent.objective - 1e-12 * (1.0 + abs(incumbent.objective)):
            continue
        if nodes >= node_limit:
            raise NodeLimitError(f"branch-and-bound exceeded {node_limit} nodes", incumbent, bound)
        nodes += 1
        sol = solve_lp(replace(base, lb=nlb, ub=nub))
        iterations += sol.iterations
        if sol.status == INFEASIBLE:
            continue
        if sol.status == UNBOUNDED:
            return LpSolution(status=UNBOUNDED, iterations=iterations, nodes=nodes)
        if incumbent is not None and sol.objective >= incumbent.objective - 1e-12 * (1.0 + abs(incumbent.objective)):
            continue
        xb = sol.x[B] if B.size else np.zeros(0)
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if not np.any(frac > int_tol):
            flb, fub = nlb.copy(), nub.copy()
            if B.size:
                fixed = np.round(xb)
                flb[B] = fixed
                fub[B] = fixed
                leaf = solve_lp(replace(base, lb=flb, ub=fub))
                iterations += leaf.iterations
                if leaf.status != OPTIMAL:
                    continue
            else:
                leaf = sol
            if incumbent is None or leaf.objective < incumbent.objective:
                incumbent = leaf
            continue
        j = int(B[np.argmax(frac)])
        for value in (0.0, 1.0):
            clb, cub = nlb.copy(), nub.copy()
            clb[j] = value
            cub[j] = value
            heapq.heappush(heap, (sol.objective, next(counter), clb, cub))
    if incumbent is None:
        return LpSolution(status=INFEASIBLE, iterations=iterations, nodes=nodes)
    return replace(incumbent, iterations=iterations, nodes=nodes)
