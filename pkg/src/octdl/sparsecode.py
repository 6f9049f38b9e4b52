"""l1-regularised least squares.

The objective follows the unscaled convention used throughout the package::

    f(x) = ||y - D x||_2^2 + lam * ||x||_1

so for an orthonormal ``D`` the minimiser is ``soft_threshold(D.T @ y, lam / 2)``.
The solver is FISTA with step ``1 / (2 L)`` (``L`` the largest eigenvalue of
``D.T @ D``) and a restart whenever the objective would increase, which makes
the recorded objective sequence non-increasing.
"""
import numpy as np

from ._validation import check_matrix, check_nonnegative
from .exceptions import InvalidInputError, ShapeMismatchError

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 500


def soft_threshold(v, t):
    """Proximal operator of ``t * ||.||_1``: ``sign(v) * max(|v| - t, 0)``."""
    if np.any(np.asarray(t) < 0):
        raise InvalidInputError("threshold must be non-negative")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lipschitz_constant(G, n_iter=50, tol=1e-9):
    """Largest eigenvalue of the symmetric PSD matrix ``G`` by power iteration."""
    G = np.asarray(G, dtype=np.float64)
    k = G.shape[0]
    if k == 0:
        return 0.0
    # fixed start vector: results must not depend on global RNG state
    v = np.random.default_rng(0).standard_normal(k)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = G @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam_new = float(v @ G @ v)
        if abs(lam_new - lam) <= tol * max(abs(lam_new), 1e-300):
            lam = lam_new
            break
        lam = lam_new
    return lam


def _objective(G, B, yy, X, lam):
    # ||y - Dx||^2 expanded through the Gram matrix, one value per column
    fit = yy - 2.0 * np.einsum("ij,ij->j", X, B) + np.einsum("ij,ij->j", X, G @ X)
    return np.maximum(fit, 0.0) + lam * np.abs(X).sum(axis=0)


def fista_gram(G, B, yy, lam, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, L=None,
               X0=None, trace=False):
    """Column-wise FISTA given ``G = D.T D``, ``B = D.T Y`` and ``yy = ||y_j||^2``.

    Every column runs its own momentum, restart and stopping logic; columns
    never influence each other. Returns ``(X, objectives)`` and, when
    ``trace`` is set, a list of per-iteration objective vectors.
    """
    k, m = B.shape
    if L is None:
        L = lipschitz_constant(G)
    X = np.zeros((k, m)) if X0 is None else np.array(X0, dtype=np.float64)
    if k == 0 or L == 0.0:
        F = _objective(G, B, yy, X, lam)
        return X, F, ([F.copy()] if trace else None)
    step = 1.0 / (2.0 * L)
    thresh = lam * step
    F = _objective(G, B, yy, X, lam)
    Z = X.copy()
    t = np.ones(m)
    active = np.ones(m, dtype=bool)
    history = [F.copy()] if trace else None
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Xa, Za = X[:, idx], Z[:, idx]
        Xn = soft_threshold(Za - step * 2.0 * (G @ Za - B[:, idx]), thresh)
        Fn = _objective(G, B[:, idx], yy[idx], Xn, lam)
        up = Fn > F[idx]
        if np.any(up):
            # restart: drop momentum and take a plain proximal step from X
            Xu = Xa[:, up]
            Ga = soft_threshold(Xu - step * 2.0 * (G @ Xu - B[:, idx[up]]), thresh)
            Fu = _objective(G, B[:, idx[up]], yy[idx[up]], Ga, lam)
            keep = Fu > F[idx[up]]
            Ga[:, keep] = Xu[:, keep]
            Fu[keep] = F[idx[up]][keep]
            Xn[:, up] = Ga
            Fn[up] = Fu
        tn = np.where(up, 1.0, (1.0 + np.sqrt(1.0 + 4.0 * t[idx] ** 2)) / 2.0)
        mom = np.where(up, 0.0, (t[idx] - 1.0) / tn)
        Z[:, idx] = Xn + mom * (Xn - Xa)
        rel = (F[idx] - Fn) / np.maximum(np.abs(F[idx]), 1e-300)
        X[:, idx] = Xn
        F[idx] = Fn
        t[idx] = np.where(up, 1.0, tn)
        done = rel < tol
        active[idx[done]] = False
        if trace:
            history.append(F.copy())
    return X, F, history


def lasso(D, y, lam, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, return_objective=False):
    """Solve ``min_x ||y - D x||^2 + lam ||x||_1`` for a single signal ``y``.

    Returns the coefficient vector, plus its objective value when
    ``return_objective`` is set. The objective never exceeds that of ``x = 0``.
    """
    y = check_matrix(y, "y", ndim=1)
    X, F = lasso_batch(D, y[:, None], lam, max_iter=max_iter, tol=tol, return_objective=True)
    if return_objective:
        return X[:, 0], float(F[0])
    return X[:, 0]


def lasso_batch(D, Y, lam, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, return_objective=False):
    """Column-wise :func:`lasso` for a matrix of signals ``Y`` (n x m)."""
    D = check_matrix(D, "D")
    Y = check_matrix(Y, "Y")
    lam = check_nonnegative(lam, "lam")
    if D.shape[0] != Y.shape[0]:
        raise ShapeMismatchError(f"D has {D.shape[0]} rows but Y has {Y.shape[0]}")
    G = D.T @ D
    B = D.T @ Y
    yy = np.einsum("ij,ij->j", Y, Y)
    X, F, _ = fista_gram(G, B, yy, lam, max_iter=max_iter, tol=tol)
    if return_objective:
        return X, F
    return X


def residual(D, X, Y):
    """Squared Frobenius norm of ``Y - D X``."""
    D = check_matrix(D, "D")
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if Y.ndim == 1:
        Y = Y[:, None]
    if D.shape[1] != X.shape[0] or D.shape[0] != Y.shape[0] or X.shape[1] != Y.shape[1]:
        raise ShapeMismatchError(
            f"cannot form Y - D X with D {D.shape}, X {X.shape}, Y {Y.shape}")
    R = Y - D @ X
    return float(np.sum(R * R))
