import numpy as np
import pytest

from mukit.core import DimensionError
from mukit.lowrank import additive_bound, loss_gap, tightness_instance, tightness_ratio, truncated_svd


def test_full_rank_reproduces_matrix(rng):
    X = rng.standard_normal((6, 4))
    a = truncated_svd(X, 4)
    np.testing.assert_allclose(a.X_tilde, X, atol=1e-12)
    assert a.spectral_error == 0.0
    assert a.rank == 4


def test_rank_zero_is_zero_matrix(rng):
    X = rng.standard_normal((6, 4))
    a = truncated_svd(X, 0)
    np.testing.assert_array_equal(a.X_tilde, np.zeros((6, 4)))
    assert a.spectral_error == pytest.approx(np.linalg.norm(X, 2))


def test_diagonal_example():
    a = truncated_svd(np.diag([3.0, 1.0]), 1)
    assert a.spectral_error == pytest.approx(1.0)
    np.testing.assert_allclose(a.X_tilde, np.diag([3.0, 0.0]), atol=1e-15)


def test_spectral_error_is_residual_norm(rng):
    X = rng.standard_normal((20, 6))
    for r in range(6):
        a = truncated_svd(X, r)
        assert np.linalg.norm(X - a.X_tilde, 2) == pytest.approx(a.spectral_error, rel=1e-10)


@pytest.mark.parametrize("r", [-1, 5, 1.5])
def test_invalid_rank(r):
    with pytest.raises(ValueError):
        truncated_svd(np.ones((4, 4)), r)


def test_identical_matrices(rng):
    X = rng.standard_normal((5, 3))
    beta = rng.standard_normal(3)
    assert additive_bound(X, X, beta) == 0.0
    assert loss_gap(X, X, beta) == 0.0


def test_zero_parameter(rng):
    X, Y = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
    assert additive_bound(X, Y, np.zeros(3)) == 0.0
    assert loss_gap(X, Y, np.zeros(3)) == 0.0


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        loss_gap(np.ones((3, 2)), np.ones((2, 2)), np.ones(2))


def test_bound_holds_for_truncations(rng):
    X = rng.standard_normal((50, 8))
    for r in range(1, 8):
        Xt = truncated_svd(X, r).X_tilde
        for _ in range(20):
            beta = rng.standard_normal(8) * rng.uniform(0.1, 10)
            assert loss_gap(X, Xt, beta) <= additive_bound(X, Xt, beta)


def test_tight_instance_scalar():
    X, Xt, beta = tightness_instance(1, 20.0, 0.5)
    assert loss_gap(X, Xt, beta) >= 0.499
    assert additive_bound(X, Xt, beta) == pytest.approx(0.5)


def test_tight_instance_ratio():
    assert tightness_ratio(4, 30.0, 0.5) >= 1 - 1e-9


def test_tight_instance_degenerate():
    X, Xt, beta = tightness_instance(3, 0.0, 0.0)
    assert loss_gap(X, Xt, beta) == 0.0


def test_tight_ratio_grows_with_offset():
    ratios = [tightness_ratio(4, x, 0.5) for x in (0.0, 1.0, 5.0, 10.0, 20.0)]
    assert all(a <= b + 1e-15 for a, b in zip(ratios, ratios[1:]))
    assert ratios[0] < 0.7


def test_tight_instance_validation():
    with pytest.raises(ValueError):
        tightness_instance(0, 1.0, 0.5)
    with pytest.raises(ValueError):
        tightness_ratio(2, 1.0, 0.0)
