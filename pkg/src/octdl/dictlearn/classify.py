"""Decision rules for trained structured dictionaries.

Each ``predict_*`` function works on a batch ``Y`` (one sample per column)
and returns ``(class_indices, scores)`` with ``scores`` of shape
``(n_samples, n_classes)``; lower scores win and ties go to the lowest class
index. The ``classify_*`` wrappers handle one sample and return its label.
"""
import numpy as np

from .._validation import check_matrix
from ..exceptions import ShapeMismatchError, WrongAlgorithmError
from ..sparsecode import DEFAULT_MAX_ITER, DEFAULT_TOL, fista_gram, lasso_batch

RULES = ("gc", "lc", "lrsdl")


def _as_batch(model, Y):
    Y = np.asarray(Y, dtype=np.float64)
    Y = check_matrix(Y[:, None] if Y.ndim == 1 else Y, "Y")
    if Y.shape[0] != model.dictionary.n_features:
        raise ShapeMismatchError(
            f"samples have dimension {Y.shape[0]}, model expects {model.dictionary.n_features}")
    return Y


def _decide(scores):
    # argmin returns the first minimum, i.e. the lowest class index on ties
    return np.argmin(scores, axis=1), scores


def predict_gc(model, Y, gamma=None, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Global rule: code over the whole dictionary, score by per-class reconstruction.

    The error of class ``c`` is ``||y - D_c x^c - D_0 x^0||^2``.
    """
    D = model.dictionary
    Y = _as_batch(model, Y)
    gamma = model.config.gamma if gamma is None else gamma
    Xbar = lasso_batch(D.full, Y, gamma, max_iter=max_iter, tol=tol)
    rows, shared = D.row_slices()
    base = Y - D.shared @ Xbar[shared]
    scores = np.empty((Y.shape[1], D.n_classes))
    for c, Dc in enumerate(D.class_dicts):
        R = base - Dc @ Xbar[rows[c]]
        scores[:, c] = np.sum(R * R, axis=0)
    return _decide(scores)


def predict_lc(model, Y, gamma=None, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Local rule: code over each ``[D_c, D_0]`` alone; score by the coding objective."""
    D = model.dictionary
    Y = _as_batch(model, Y)
    gamma = model.config.gamma if gamma is None else gamma
    scores = np.empty((Y.shape[1], D.n_classes))
    for c, Dc in enumerate(D.class_dicts):
        _, F = lasso_batch(np.hstack([Dc, D.shared]), Y, gamma, max_iter=max_iter, tol=tol,
                           return_objective=True)
        scores[:, c] = F
    return _decide(scores)


def code_lrsdl(model, Y, lambda1=None, lambda2=None, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Codes minimising ``||y - D x||^2 + l1 ||x||_1 + l2/2 ||x^0 - m^0||^2``.

    The pull toward the shared mean is folded into the Gram matrix, which
    turns the problem into a plain l1-regularised least squares.
    """
    D = model.dictionary
    Y = _as_batch(model, Y)
    cfg = model.config
    lambda1 = cfg.lambda1 if lambda1 is None else lambda1
    lambda2 = cfg.lambda2 if lambda2 is None else lambda2
    Dfull = D.full
    G = Dfull.T @ Dfull
    B = Dfull.T @ Y
    yy = np.einsum("ij,ij->j", Y, Y)
    _, shared = D.row_slices()
    m0 = model.stats.shared_mean
    if shared.stop > shared.start and lambda2 > 0:
        rho = 0.5 * lambda2
        idx = np.arange(shared.start, shared.stop)
        G = G.copy()
        G[idx, idx] += rho
        B = B.copy()
        B[shared] += rho * m0[:, None]
        yy = yy + rho * float(m0 @ m0)
    X, _, _ = fista_gram(G, B, yy, lambda1, max_iter=max_iter, tol=tol)
    return X


def predict_lrsdl(model, Y, lambda1=None, lambda2=None, w=None,
                  max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Shared-stripped rule: ``w ||y - D_0 x^0 - D_c x^c||^2 + (1-w) ||x - m_c||^2``."""
    if model.stats is None or model.stats.class_means is None:
        raise WrongAlgorithmError("model carries no class mean codes")
    D = model.dictionary
    Y = _as_batch(model, Y)
    w = model.config.w if w is None else w
    Xbar = code_lrsdl(model, Y, lambda1, lambda2, max_iter=max_iter, tol=tol)
    rows, shared = D.row_slices()
    K = D.n_class_atoms
    ybar = Y - D.shared @ Xbar[shared]
    X = Xbar[:K]
    scores = np.empty((Y.shape[1], D.n_classes))
    for c, Dc in enumerate(D.class_dicts):
        R = ybar - Dc @ Xbar[rows[c]]
        dev = X - model.stats.class_means[c][:, None]
        scores[:, c] = w * np.sum(R * R, axis=0) + (1.0 - w) * np.sum(dev * dev, axis=0)
    return _decide(scores)


def predict(model, Y, rule=None, **kwargs):
    rule = rule or default_rule(model.algorithm)
    if rule == "gc":
        return predict_gc(model, Y, **kwargs)
    if rule == "lc":
        return predict_lc(model, Y, **kwargs)
    if rule == "lrsdl":
        return predict_lrsdl(model, Y, **kwargs)
    raise ValueError(f"unknown rule {rule!r}; choose from {RULES}")


def default_rule(algorithm):
    return {"fddl": "gc", "copar": "gc", "lrsdl": "lrsdl"}[algorithm]


def _single(fn, model, y, *args, **kwargs):
    idx, scores = fn(model, np.asarray(y, dtype=np.float64).reshape(-1, 1), *args, **kwargs)
    return model.labels[int(idx[0])], scores[0]


def classify_gc(model, y, gamma=None, **kwargs):
    """Label and per-class errors of one sample under the global rule."""
    return _single(predict_gc, model, y, gamma, **kwargs)


def classify_lc(model, y, gamma=None, **kwargs):
    return _single(predict_lc, model, y, gamma, **kwargs)


def classify_lrsdl(model, y, lambda1=None, lambda2=None, w=None, **kwargs):
    return _single(predict_lrsdl, model, y, lambda1, lambda2, w, **kwargs)
