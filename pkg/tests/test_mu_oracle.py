import math

import numpy as np
import pytest

from mukit.core import mu_ratio
from mukit.mu_exact import compute_mu_exact
from mukit.mu_oracle import OracleSizeError, mu_bruteforce


def test_antipodal():
    assert mu_bruteforce([[1.0], [-1.0]]).mu == pytest.approx(1.0)


def test_three_directions_in_the_plane():
    A = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    res = mu_bruteforce(A)
    assert math.isfinite(res.mu)
    assert res.mu == pytest.approx(compute_mu_exact(A).mu, rel=1e-6)


def test_positive_rows_are_separable():
    assert mu_bruteforce([[1.0, 2.0], [3.0, 1.0], [0.5, 0.5]]).mu == math.inf


def test_witness_attains_value(rng):
    for _ in range(10):
        A = rng.integers(-5, 6, (6, 2)).astype(float)
        if not np.any(A):
            continue
        res = mu_bruteforce(A)
        v = A @ res.beta_star
        if math.isinf(res.mu):
            # round-off entries are cleaned before the ratio is taken
            assert np.sum(np.maximum(-v, 0)) <= 1e-9 * np.abs(v).sum()
        else:
            assert mu_ratio(A, res.beta_star) == pytest.approx(res.mu, rel=1e-9)


def test_rank_deficient_input():
    A = np.array([[1.0, 1.0], [-2.0, -2.0], [3.0, 3.0]])
    assert mu_bruteforce(A).mu == pytest.approx(2.0)


def test_labels_are_applied():
    assert mu_bruteforce([[2.0], [1.0]], [1, -1]).mu == pytest.approx(2.0)


def test_size_limits():
    with pytest.raises(OracleSizeError):
        mu_bruteforce(np.ones((13, 2)))
    with pytest.raises(OracleSizeError):
        mu_bruteforce(np.ones((5, 5)))


def test_seeded(rng):
    A = rng.standard_normal((8, 3))
    a = mu_bruteforce(A, seed=4)
    b = mu_bruteforce(A, seed=4)
    assert a.mu == b.mu


def test_agrees_with_lp_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(60):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        A = rng.integers(-5, 6, (n, d)).astype(float)
        if not np.any(A):
            continue
        exact = compute_mu_exact(A).mu
        brute = mu_bruteforce(A, n_random=500).mu
        assert math.isinf(exact) == math.isinf(brute)
        if math.isfinite(exact):
            assert exact == pytest.approx(brute, rel=1e-6)
