"""Hard instances for loss approximation and their verifiers.

* logistic-to-ReLU rescaling: ``L(t beta) / t`` is within ``n / t`` of the
  ReLU loss ``R(beta)`` (labels all -1, so ``L(beta) = sum log(1 + e^{x^T beta})``);
* the weighted hypercube: every sign vector in {-1, 1}^k, re-weighted;
* near-orthogonal sign matrices by rejection sampling;
* the INDEX encoding: a bit string hidden in a matrix whose ReLU loss at a
  query vector reveals any single bit;
* block-diagonal composition of independent instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from mukit.core import as_data_matrix, as_labels, as_param, logistic_loss, relu_loss

MAX_HYPERCUBE_K = 14


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


# -- logistic to ReLU -------------------------------------------------------


@dataclass(frozen=True)
class ReductionConfig:
    """Scale ``t`` used to read ReLU loss off logistic loss.

    ``n`` is the row count, ``epsilon`` the target relative error and
    ``r_min`` a lower bound on the ReLU loss over the queries of interest.
    """

    t: float
    n: int
    epsilon: Optional[float] = None
    r_min: float = 1.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not self.r_min > 0:
            raise ValueError("r_min must be positive")

    @classmethod
    def for_accuracy(cls, n: int, epsilon: float, r_min: float = 1.0) -> "ReductionConfig":
        """``t = n / (epsilon * r_min)``: then ``|L(t beta)/t - R(beta)| <= epsilon * r_min``."""
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        return cls(t=n / (epsilon * r_min), n=n, epsilon=epsilon, r_min=r_min)

    @property
    def gap_bound(self) -> float:
        return self.n / self.t


def negative_label_logistic_loss(X, beta) -> float:
    """``sum_i log(1 + exp(x_i^T beta))``: logistic loss with every label -1."""
    X = as_data_matrix(X)
    return logistic_loss(X, -np.ones(X.shape[0]), beta)


def relu_from_logistic(logistic_value_at_t_beta: float, cfg: ReductionConfig) -> float:
    return float(logistic_value_at_t_beta) / cfg.t


def reduction_gap(X, beta, t: float) -> float:
    """``|L(t beta)/t - R(beta)|`` evaluated directly."""
    X = as_data_matrix(X)
    beta = as_param(beta, X.shape[1])
    cfg = ReductionConfig(t=t, n=X.shape[0])
    return abs(relu_from_logistic(negative_label_logistic_loss(X, t * beta), cfg) - relu_loss(X, beta))


# -- weighted hypercube -----------------------------------------------------


@dataclass(frozen=True)
class HypercubeInstance:
    k: int
    X: np.ndarray
    weights: np.ndarray
    signs: np.ndarray
    y: np.ndarray


def hypercube_weight_range(k: int) -> tuple[float, float]:
    """``[max(2 sqrt k, 3), 8 sqrt k]``.

    Every weight must be at least 3 for the ReLU loss to dominate
    ``3 ||beta||_1``, and the ratio of any two weights must stay at most 4
    for the mu bound; ``2 sqrt k`` alone is below 3 when k = 2.
    """
    root = math.sqrt(k)
    return max(2.0 * root, 3.0), 8.0 * root


def gen_weighted_hypercube(
    k: int, seed: int = 0, weight_range: Optional[tuple[float, float]] = None
) -> HypercubeInstance:
    """All 2^k sign vectors, row i scaled by a weight drawn uniformly from
    ``weight_range`` (default :func:`hypercube_weight_range`)."""
    if not 1 <= k <= MAX_HYPERCUBE_K:
        raise ValueError(f"k must lie in [1, {MAX_HYPERCUBE_K}], got {k}")
    lo, hi = hypercube_weight_range(k) if weight_range is None else map(float, weight_range)
    if not 0 < lo <= hi:
        raise ValueError(f"invalid weight range [{lo}, {hi}]")
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=k)))
    weights = _rng(seed).uniform(lo, hi, size=signs.shape[0])
    X = weights[:, None] * signs
    return HypercubeInstance(k=k, X=X, weights=weights, signs=signs, y=-np.ones(signs.shape[0]))


# -- near-orthogonal sign matrices --------------------------------------------


class NearOrthogonalityError(RuntimeError):
    def __init__(self, message: str, best_max: float):
        super().__init__(message)
        self.best_max = best_max


@dataclass(frozen=True)
class NearOrthogonalMatrix:
    M: np.ndarray
    tau_ip: float
    max_inner: float
    attempts: int


def default_inner_threshold(n: int, k: int) -> float:
    """``4 sqrt(k ln n)``: Hoeffding plus a union bound over the n^2 pairs
    leaves failure probability at most ``2 n^-6`` per draw."""
    return 4.0 * math.sqrt(k * math.log(n))


def max_offdiag_inner(M: np.ndarray) -> float:
    G = M @ M.T
    np.fill_diagonal(G, 0.0)
    return float(np.abs(G).max()) if G.size else 0.0


def gen_near_orthogonal(
    n: int, k: int, tau_ip: Optional[float] = None, seed: int = 0, max_retries: int = 10
) -> NearOrthogonalMatrix:
    """Sample uniform sign matrices until every pair of rows has
    ``|<M_i, M_j>| <= tau_ip``; every pair is checked."""
    if k < 1 or n < 2:
        raise ValueError("need k >= 1 and n >= 2")
    if max_retries < 1:
        raise ValueError("max_retries must be positive")
    tau = default_inner_threshold(n, k) if tau_ip is None else float(tau_ip)
    rng = _rng(seed)
    best = np.inf
    for attempt in range(1, max_retries + 1):
        M = rng.choice(np.array([-1.0, 1.0]), size=(n, k))
        worst = max_offdiag_inner(M)
        best = min(best, worst)
        if worst <= tau:
            return NearOrthogonalMatrix(M=M, tau_ip=tau, max_inner=worst, attempts=attempt)
    raise NearOrthogonalityError(
        f"no {n}x{k} sign matrix with inner products <= {tau:g} in {max_retries} draws "
        f"(best maximum {best:g})",
        best,
    )


# -- INDEX encoding ------------------------------------------------------------


def default_mu_weight(n: int) -> float:
    """``log2(n)^2 / (64 n)``."""
    return math.log2(n) ** 2 / (64.0 * n)


@dataclass(frozen=True)
class IndexInstance:
    """Rows ``[M~ | 1]`` on top of ``-mu_weight * [M~ | 1]``.

    Row i of ``M~`` is row i of M when ``bits[i] == 1`` and half of it
    otherwise. Row ``i`` and row ``n/2 + i`` form a pair.
    """

    bits: np.ndarray
    M_tilde: np.ndarray
    mu_weight: float
    X: np.ndarray

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k_prime(self) -> int:
        return self.M_tilde.shape[1]

    def pair(self, i: int) -> int:
        return self.n // 2 + i


def build_index_encoding(bits, M, mu_weight: Optional[float] = None) -> IndexInstance:
    M = M.M if isinstance(M, NearOrthogonalMatrix) else np.asarray(M, dtype=float)
    bits = np.asarray(bits).reshape(-1)
    if not np.all((bits == 0) | (bits == 1)):
        raise ValueError("bits must be 0 or 1")
    if M.ndim != 2 or M.shape[0] != bits.size:
        raise ValueError(f"M must have one row per bit ({bits.size}), got shape {M.shape}")
    n = 2 * bits.size
    if n & (n - 1):
        raise ValueError(f"row count {n} is not a power of two")
    w = default_mu_weight(n) if mu_weight is None else float(mu_weight)
    if not w > 0:
        raise ValueError("mu_weight must be positive")
    M_tilde = np.where(bits[:, None] == 1, M, 0.5 * M)
    top = np.hstack([M_tilde, np.ones((bits.size, 1))])
    X = np.vstack([top, -w * top])
    return IndexInstance(bits=bits.astype(int), M_tilde=M_tilde, mu_weight=w, X=X)


def query_vector(inst: IndexInstance, i: int) -> np.ndarray:
    """``[M~_i, -4 log2(n)^2]``."""
    if not 0 <= i < inst.n // 2:
        raise IndexError(f"bit index {i} out of range")
    return np.concatenate([inst.M_tilde[i], [-4.0 * math.log2(inst.n) ** 2]])


def default_bit_threshold(n: int) -> float:
    """``(3/4) log2(n/2)^4``."""
    return 0.75 * math.log2(n / 2) ** 4


def query_bit(
    inst: IndexInstance, i: int, relu_oracle: Callable[[np.ndarray], float], threshold: Optional[float] = None
) -> int:
    """1 iff the oracle's ReLU value at the query vector exceeds the threshold."""
    tau = default_bit_threshold(inst.n) if threshold is None else threshold
    return int(relu_oracle(query_vector(inst, i)) > tau)


def exact_relu_oracle(inst: IndexInstance) -> Callable[[np.ndarray], float]:
    return lambda beta: relu_loss(inst.X, beta)


def perturbed_relu_oracle(inst: IndexInstance, seed: int) -> Callable[[np.ndarray], float]:
    """ReLU loss times an independent uniform [1, 2] factor per call."""
    rng = _rng(seed)
    return lambda beta: relu_loss(inst.X, beta) * rng.uniform(1.0, 2.0)


@dataclass(frozen=True)
class QueryMargins:
    """Row activities at the query for bit i, grouped by the proof cases.

    ``other_top``: rows j < n/2, j != i; ``other_bottom``: rows j >= n/2
    except the pair of i; ``pair``: row n/2 + i. ``bound`` is
    ``mu_weight * 8 log2(n)^2``, which every one of them should stay below.
    """

    i: int
    own: float
    other_top: float
    other_bottom: float
    pair: float
    bound: float
    relu: float

    @property
    def holds(self) -> bool:
        return max(self.other_top, self.other_bottom, self.pair) < self.bound


def query_margins(inst: IndexInstance, i: int) -> QueryMargins:
    beta = query_vector(inst, i)
    z = inst.X @ beta
    h = inst.n // 2
    top = np.delete(z[:h], i)
    bottom = np.delete(z[h:], i)
    return QueryMargins(
        i=i,
        own=float(z[i]),
        other_top=float(top.max()) if top.size else -np.inf,
        other_bottom=float(bottom.max()) if bottom.size else -np.inf,
        pair=float(z[h + i]),
        bound=inst.mu_weight * 8.0 * math.log2(inst.n) ** 2,
        relu=float(np.maximum(z, 0.0).sum()),
    )


@dataclass(frozen=True)
class RecoveryReport:
    accuracy: float
    queried: int
    min_one: float
    max_zero: float
    threshold: float
    cases_hold: bool

    @property
    def separation(self) -> float:
        """Smallest bit-1 oracle value over largest bit-0 value."""
        if self.max_zero <= 0:
            return np.inf
        return self.min_one / self.max_zero


def recover_bits(
    inst: IndexInstance,
    indices: Sequence[int],
    relu_oracle: Callable[[np.ndarray], float],
    threshold: Optional[float] = None,
) -> RecoveryReport:
    tau = default_bit_threshold(inst.n) if threshold is None else threshold
    correct = 0
    ones, zeros = [], []
    cases = True
    for i in indices:
        value = relu_oracle(query_vector(inst, i))
        bit = int(value > tau)
        correct += bit == inst.bits[i]
        (ones if inst.bits[i] == 1 else zeros).append(value)
        cases &= query_margins(inst, i).holds
    return RecoveryReport(
        accuracy=float(correct) / len(indices) if len(indices) else 1.0,
        queried=len(indices),
        min_one=min(ones) if ones else np.inf,
        max_zero=max(zeros) if zeros else 0.0,
        threshold=tau,
        cases_hold=bool(cases),
    )


# -- composition ---------------------------------------------------------------


def block_diagonal(parts: Sequence[tuple]) -> tuple[np.ndarray, np.ndarray]:
    """Stack ``(X_j, y_j)`` blocks along the diagonal and concatenate labels."""
    if not parts:
        raise ValueError("need at least one block")
    Xs, ys = [], []
    for X, y in parts:
        X = as_data_matrix(X)
        Xs.append(X)
        ys.append(as_labels(y, X.shape[0]))
    return scipy.linalg.block_diag(*Xs), np.concatenate(ys)


# -- verification summary ---------------------------------------------------------


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)


def verify_constructions(seed: int = 0, n_index: int = 256, n_queries: int = 32) -> list[CheckReport]:
    """Run every construction once at small scale and report margins."""
    from mukit.mu_exact import compute_mu_exact

    rng = _rng(seed)
    reports = []

    X = rng.standard_normal((20, 3))
    worst = 0.0
    for t in (10.0, 100.0, 1000.0):
        for _ in range(100):
            beta = rng.standard_normal(3)
            worst = max(worst, reduction_gap(X, beta, t) * t / X.shape[0])
    reports.append(CheckReport("logistic_to_relu", worst <= 1.0, {"max_gap_over_bound": worst}))

    for k in (2, 3, 4):
        inst = gen_weighted_hypercube(k, seed)
        mu = compute_mu_exact(inst.X, inst.y).mu
        betas = rng.standard_normal((1000, k))
        ratio = float(np.min(np.maximum(betas @ inst.X.T, 0.0).sum(axis=1) / np.abs(betas).sum(axis=1)))
        reports.append(
            CheckReport(
                f"hypercube_k{k}",
                mu <= 4.0 + 1e-6 and ratio >= 3.0,
                {"mu": mu, "min_relu_over_l1": ratio, "min_weight": float(inst.weights.min())},
            )
        )

    M = gen_near_orthogonal(4, 64, seed=seed)
    reports.append(
        CheckReport("near_orthogonal", M.max_inner <= M.tau_ip, {"max_inner": M.max_inner, "tau_ip": M.tau_ip})
    )

    h = n_index // 2
    kp = round(math.log2(h) ** 4)
    Mi = gen_near_orthogonal(h, kp, tau_ip=4.0 * math.log2(n_index) ** 2, seed=seed)
    bits = rng.integers(0, 2, size=h)
    inst = build_index_encoding(bits, Mi)
    idx = rng.choice(h, size=min(n_queries, h), replace=False)
    exact = recover_bits(inst, idx, exact_relu_oracle(inst))
    noisy = recover_bits(inst, idx, perturbed_relu_oracle(inst, seed))
    reports.append(
        CheckReport(
            "index_encoding",
            exact.accuracy == 1.0 and noisy.accuracy == 1.0 and exact.cases_hold,
            {
                "accuracy_exact": exact.accuracy,
                "accuracy_noisy": noisy.accuracy,
                "separation_exact": exact.separation,
                "separation_noisy": noisy.separation,
                "threshold": exact.threshold,
            },
        )
    )

    toy = build_index_encoding(rng.integers(0, 2, size=8), gen_near_orthogonal(8, 8, tau_ip=8, seed=seed), 0.05)
    mu = compute_mu_exact(toy.X).mu
    reports.append(CheckReport("index_mu_bound", mu <= 1.0 / toy.mu_weight + 1e-6, {"mu": mu, "bound": 20.0}))
    return reports
