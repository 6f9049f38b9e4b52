import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import lasso_enumeration, lasso_objective

from octdl.exceptions import InvalidInputError, ShapeMismatchError
from octdl.sparsecode import (
    fista_gram,
    lasso,
    lasso_batch,
    lipschitz_constant,
    residual,
    soft_threshold,
)


def random_orthonormal(rng, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold(np.array([3.0, -0.5, 0.0]), 1.0), [2, 0, 0])
    v = np.array([1.5, -2.0, 0.25])
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)
    np.testing.assert_array_equal(soft_threshold(v, 2.0), np.zeros(3))


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0, 1e3))
def test_soft_threshold_matches_definition(values, t):
    v = np.array(values)
    expected = np.array([np.sign(a) * max(abs(a) - t, 0.0) for a in values])
    np.testing.assert_array_equal(soft_threshold(v, t), expected)


def test_lipschitz_constant_is_top_eigenvalue(rng):
    D = rng.standard_normal((12, 7))
    G = D.T @ D
    assert lipschitz_constant(G) == pytest.approx(np.linalg.eigvalsh(G)[-1], rel=1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_orthonormal_closed_form(seed):
    rng = np.random.default_rng(seed)
    D = random_orthonormal(rng, 10)
    y = rng.standard_normal(10)
    lam = 0.7
    x = lasso(D, y, lam)
    np.testing.assert_allclose(x, soft_threshold(D.T @ y, lam / 2), atol=1e-8, rtol=0)


def test_zero_signal_gives_zero_code(rng):
    D = rng.standard_normal((6, 10))
    np.testing.assert_array_equal(lasso(D, np.zeros(6), 0.5), np.zeros(10))


@pytest.mark.parametrize("seed", range(5))
def test_enumeration_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    D = rng.standard_normal((6, 10))
    D /= np.linalg.norm(D, axis=0)
    x_true = np.zeros(10)
    x_true[rng.choice(10, 3, replace=False)] = rng.standard_normal(3)
    y = D @ x_true
    x = lasso(D, y, 0.5)
    assert lasso_objective(D, y, x, 0.5) <= lasso_enumeration(D, y, 0.5) + 1e-6


def test_objective_never_above_zero_code(rng):
    D = rng.standard_normal((8, 20))
    Y = rng.standard_normal((8, 30))
    X, F = lasso_batch(D, Y, 0.3, return_objective=True)
    assert np.all(F <= np.sum(Y * Y, axis=0) + 1e-12)


def test_restarted_iterates_are_monotone(rng):
    D = rng.standard_normal((15, 40))
    Y = rng.standard_normal((15, 5))
    G, B = D.T @ D, D.T @ Y
    _, _, hist = fista_gram(G, B, np.sum(Y * Y, axis=0), 0.2, trace=True)
    hist = np.asarray(hist)
    assert np.all(np.diff(hist, axis=0) <= 1e-12 * np.maximum(1.0, np.abs(hist[:-1])))


@given(st.integers(0, 2 ** 16))
@settings(max_examples=25, deadline=None)
def test_large_penalty_gives_zero(seed):
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((5, 8))
    y = rng.standard_normal(5)
    lam = 2 * np.max(np.abs(D.T @ y)) * 1.0000001
    np.testing.assert_array_equal(lasso(D, y, lam), np.zeros(8))


def test_batch_single_column_and_duplicates(rng):
    D = rng.standard_normal((6, 9))
    y = rng.standard_normal(6)
    np.testing.assert_array_equal(lasso_batch(D, y[:, None], 0.4)[:, 0], lasso(D, y, 0.4))
    X = lasso_batch(D, np.column_stack([y, y]), 0.4)
    np.testing.assert_array_equal(X[:, 0], X[:, 1])


def test_batch_matches_columnwise(rng):
    D = rng.standard_normal((7, 12))
    Y = rng.standard_normal((7, 6))
    _, F = lasso_batch(D, Y, 0.3, return_objective=True)
    for j in range(Y.shape[1]):
        _, f = lasso(D, Y[:, j], 0.3, return_objective=True)
        assert f == pytest.approx(F[j], abs=1e-10)


def test_permutation_invariance(rng):
    D = rng.standard_normal((10, 15))
    y = rng.standard_normal(10)
    perm = rng.permutation(15)
    x = lasso(D, y, 0.2, tol=1e-12, max_iter=5000)
    xp = lasso(D[:, perm], y, 0.2, tol=1e-12, max_iter=5000)
    np.testing.assert_allclose(xp, x[perm], atol=1e-5)


def test_residual(rng):
    D = rng.standard_normal((5, 4))
    X = rng.standard_normal((4, 3))
    Y = D @ X
    assert residual(D, X, Y) == pytest.approx(0.0, abs=1e-20)
    assert residual(D, np.zeros((4, 3)), Y) == pytest.approx(np.sum(Y ** 2))
    Y2 = rng.standard_normal((5, 3))
    direct = sum((Y2[i, j] - sum(D[i, k] * X[k, j] for k in range(4))) ** 2
                 for i in range(5) for j in range(3))
    assert residual(D, X, Y2) == pytest.approx(direct, rel=1e-12)


def test_input_errors(rng):
    D = rng.standard_normal((4, 6))
    with pytest.raises(InvalidInputError):
        lasso(D, np.array([1.0, np.nan, 0, 0]), 0.1)
    with pytest.raises(ShapeMismatchError):
        lasso(D, np.ones(5), 0.1)
    with pytest.raises(ShapeMismatchError):
        residual(D, np.ones((6, 2)), np.ones((3, 2)))
