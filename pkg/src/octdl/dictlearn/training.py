"""Alternating minimisation for FDDL, COPAR and LRSDL.

Each outer iteration runs three block updates, each a monotone FISTA
(Beck & Teboulle's MFISTA) with backtracking on the step size:

1. codes ``Xbar`` (all classes and the shared block at once, computed from
   the dictionary as it stood at the start of the pass);
2. the class sub-dictionaries ``D_1..D_C`` jointly, projected onto unit-norm
   balls;
3. the shared dictionary ``D_0`` (COPAR, LRSDL); LRSDL adds the nuclear norm
   through a singular-value-thresholding proximal step.

Every block step keeps the better of its starting point and its candidate,
so the objective trace cannot increase.
"""
import logging
import warnings

import numpy as np

from .._validation import check_matrix
from ..exceptions import InsufficientDataError, InvalidInputError, ShapeMismatchError
from ..sparsecode import soft_threshold
from .objectives import CodeSmooth, DictSmooth, nuclear_norm, objective
from .structure import (
    ClassStats,
    Partition,
    StructuredDictionary,
    TrainConfig,
    TrainedModel,
    init_dictionary,
    project_unit_ball,
)

log = logging.getLogger(__name__)

DYKSTRA_ITERS = 25
DYKSTRA_TOL = 1e-12


def mfista(x0, smooth, nonsmooth, prox, L0, n_iter, tol=1e-10):
    """Monotone FISTA with backtracking.

    ``smooth(x, need_grad)`` returns the value (and gradient), ``nonsmooth(x)``
    the non-differentiable part and ``prox(v, step)`` its proximal map.
    Returns ``(x, F(x), L)`` where ``F(x) <= F(x0)``.
    """
    x = x0
    fx = smooth(x, False)
    Fx = fx + nonsmooth(x)
    y, t, L = x, 1.0, max(L0, 1e-12)
    for _ in range(n_iter):
        fy, gy = smooth(y, True)
        while True:
            z = prox(y - gy / L, 1.0 / L)
            fz = smooth(z, False)
            d = z - y
            if fz <= fy + np.sum(gy * d) + 0.5 * L * np.sum(d * d) + 1e-12 * abs(fy):
                break
            L *= 2.0
        Fz = fz + nonsmooth(z)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        accepted = Fz <= Fx
        x_new, F_new = (z, Fz) if accepted else (x, Fx)
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1.0) / t_new) * (x_new - x)
        gain = Fx - F_new
        x, Fx, t = x_new, F_new, t_new
        if accepted and gain <= tol * max(abs(Fx), 1e-300):
            break
    return x, Fx, L


def svt(A, threshold):
    """Singular value soft-thresholding: proximal map of ``threshold * ||.||_*``."""
    if A.size == 0:
        return A
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U * np.maximum(s - threshold, 0.0)) @ Vt


def nuclear_ball_prox(A, threshold, n_iter=DYKSTRA_ITERS):
    """Approximate prox of ``threshold ||.||_*`` plus unit-norm column constraints.

    Dykstra-style alternation between :func:`svt` and the column projection;
    the result always satisfies the column constraint.
    """
    x = A
    p = np.zeros_like(A)
    q = np.zeros_like(A)
    for _ in range(n_iter):
        y = svt(x + p, threshold)
        p = x + p - y
        x_prev, x = x, project_unit_ball(y + q)
        q = y + q - x
        if np.max(np.abs(x - x_prev), initial=0.0) <= DYKSTRA_TOL:
            break
    return x


def _check_training_input(Y, labels, algorithm, config):
    Y = check_matrix(Y, "Y")
    labels = np.asarray(labels)
    if labels.shape != (Y.shape[1],):
        raise ShapeMismatchError("need one label per column of Y")
    classes, idx = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise InsufficientDataError("need at least two classes")
    if algorithm in ("copar", "lrsdl") and config.n_shared < 1:
        raise InvalidInputError(f"{algorithm} needs n_shared >= 1")
    if algorithm == "lrsdl" and config.eta < 0:
        raise InvalidInputError("eta must be non-negative")
    return Y, classes, idx


def train(algorithm, Y, labels, config=None, class_names=None):
    """Train a structured dictionary; ``Y`` holds one sample per column.

    ``labels`` may be any sortable class labels; classes are ordered by
    ``numpy.unique``. Returns a :class:`TrainedModel`.
    """
    config = config or TrainConfig()
    if algorithm not in ("fddl", "copar", "lrsdl"):
        raise InvalidInputError(f"unknown algorithm {algorithm!r}")
    Y, classes, idx = _check_training_input(Y, labels, algorithm, config)
    names = list(class_names) if class_names is not None else classes.tolist()
    n_shared = 0 if algorithm == "fddl" else config.n_shared
    D = init_dictionary(Y, idx, config.n_atoms, n_shared, seed=config.seed, class_names=names)
    part = Partition.build(idx, D)
    Xbar = np.zeros((D.n_atoms, Y.shape[1]))
    lam1, lam2 = config.lambda1, config.lambda2
    counts = D.atom_counts
    K = D.n_class_atoms

    l1 = lambda X: lam1 * float(np.abs(X).sum())  # noqa: E731
    l1_prox = lambda V, step: soft_threshold(V, lam1 * step)  # noqa: E731
    zero = lambda A: 0.0  # noqa: E731

    trace = []
    prev = objective(algorithm, Y, D, Xbar, idx, config)
    for it in range(config.outer_iters):
        # codes
        code = CodeSmooth(algorithm, Y, D, idx, lam2)
        Xbar, _, _ = mfista(Xbar, code, l1, l1_prox, code.lipschitz_bound(), config.code_iters)

        # class sub-dictionaries (shared block frozen)
        dsm = DictSmooth(algorithm, Y, Xbar, idx, part, lam2)
        full = D.full
        shared = full[:, K:]

        def class_smooth(Dc, need_grad, shared=shared):
            out = dsm(np.hstack([Dc, shared]), need_grad)
            return (out[0], out[1][:, :K]) if need_grad else out

        Dc, _, _ = mfista(full[:, :K], class_smooth, zero, lambda V, s: project_unit_ball(V),
                          dsm.lipschitz_bound(full), config.dict_iters)
        D = StructuredDictionary.from_full(np.hstack([Dc, shared]), counts, n_shared, names)

        if n_shared:
            fixed = D.class_part

            def shared_smooth(D0, need_grad, fixed=fixed):
                out = dsm(np.hstack([fixed, D0]), need_grad)
                return (out[0], out[1][:, K:]) if need_grad else out

            if algorithm == "lrsdl" and config.eta > 0:
                eta = config.eta
                D0, _, _ = mfista(D.shared, shared_smooth, lambda A: eta * nuclear_norm(A),
                                  lambda V, s: nuclear_ball_prox(V, eta * s),
                                  dsm.lipschitz_bound(D.full), config.dict_iters)
            else:
                D0, _, _ = mfista(D.shared, shared_smooth, zero,
                                  lambda V, s: project_unit_ball(V),
                                  dsm.lipschitz_bound(D.full), config.dict_iters)
            D = StructuredDictionary(D.class_dicts, D0, names)

        value = objective(algorithm, Y, D, Xbar, idx, config)
        trace.append(value)
        log.debug("%s iteration %d objective %.10g", algorithm, it, value)
        if value > prev * (1 + 1e-6) + 1e-12:
            warnings.warn(f"{algorithm}: objective increased at iteration {it}", RuntimeWarning)
        if prev > 0 and abs(prev - value) <= config.tol * abs(prev):
            break
        prev = value

    stats = ClassStats.from_codes(Xbar, part)
    return TrainedModel(dictionary=D, stats=stats, config=config, algorithm=algorithm,
                        objective_trace=trace, codes=Xbar)


def train_fddl(Y, labels, config=None, class_names=None):
    """Fisher discrimination dictionary learning (class dictionaries only)."""
    return train("fddl", Y, labels, config, class_names)


def train_copar(Y, labels, config=None, class_names=None):
    """Particularity/commonality learning with an incoherence penalty."""
    return train("copar", Y, labels, config, class_names)


def train_lrsdl(Y, labels, config=None, class_names=None):
    """Low-rank shared dictionary learning."""
    return train("lrsdl", Y, labels, config, class_names)
