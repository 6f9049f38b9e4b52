"""Objective functions of the three learners and the gradients of their smooth parts.

Notation: ``Y`` is n x N (one sample per column), ``labels`` holds the class
index of each column, ``D`` is a :class:`StructuredDictionary` and ``Xbar``
stacks the class-dictionary codes on top of the shared codes, matching the
atom order of ``D.full``.

All three objectives share the shape::

    f = 1/2 g(Y, D, Xbar) + lambda1 ||Xbar||_1 + lambda2/2 h(.) [+ eta ||D_0||_*]

with ``g`` summing, over classes ``c``: the fit of ``Y_c`` by the whole
dictionary, the fit by ``D_c`` (plus ``D_0`` when present), and a leakage
penalty on the other classes' blocks. FDDL and LRSDL penalise the leakage
reconstruction ``||D_j X_c^j||^2``, COPAR the codes ``||X_c^j||^2``.
"""
import numpy as np

from .._validation import check_matrix
from ..exceptions import ShapeMismatchError
from .structure import Partition

LEAK_DICT = "dict"
LEAK_CODE = "code"

_KINDS = {
    "fddl": dict(leak=LEAK_DICT, fisher=True, shared_fisher=False, incoherence=False),
    "copar": dict(leak=LEAK_CODE, fisher=False, shared_fisher=False, incoherence=True),
    "lrsdl": dict(leak=LEAK_DICT, fisher=True, shared_fisher=True, incoherence=False),
}


def _inner(a, b):
    return float(np.vdot(a, b))


def _setup(Y, D, Xbar, labels):
    Y = check_matrix(Y, "Y")
    Xbar = check_matrix(Xbar, "Xbar")
    Dfull = D.full
    if Y.shape[0] != Dfull.shape[0]:
        raise ShapeMismatchError(f"Y has {Y.shape[0]} rows, dictionary has {Dfull.shape[0]}")
    if Xbar.shape != (Dfull.shape[1], Y.shape[1]):
        raise ShapeMismatchError(
            f"Xbar must be {Dfull.shape[1]}x{Y.shape[1]}, got {Xbar.shape[0]}x{Xbar.shape[1]}")
    return Y, Dfull, Xbar, Partition.build(labels, D)


# --------------------------------------------------------------------------
# direct evaluators
# --------------------------------------------------------------------------

def fidelity(Y, D, Xbar, labels, leak=LEAK_DICT):
    """Discriminative fidelity ``g`` (no leading 1/2)."""
    Y, Dfull, Xbar, part = _setup(Y, D, Xbar, labels)
    total = 0.0
    for c, cols in enumerate(part.cols):
        Yc, Xc = Y[:, cols], Xbar[:, cols]
        R = Yc - Dfull @ Xc
        total += np.sum(R * R)
        own = part.own_rows(c)
        E = Yc - Dfull[:, own] @ Xc[own]
        total += np.sum(E * E)
        for j, rows in enumerate(part.rows):
            if j == c:
                continue
            L = Dfull[:, rows] @ Xc[rows] if leak == LEAK_DICT else Xc[rows]
            total += np.sum(L * L)
    return float(total)


def _class_sums(X, labels, n_classes):
    labels = np.asarray(labels)
    C = int(labels.max()) + 1 if n_classes is None else n_classes
    onehot = (labels[:, None] == np.arange(C)).astype(np.float64)
    counts = onehot.sum(axis=0)
    return X @ onehot, counts, onehot


def fisher_term(X, labels, n_classes=None):
    """Fisher term on class codes: within scatter - between scatter + ||X||_F^2."""
    X = np.asarray(X, dtype=np.float64)
    S, counts, _ = _class_sums(X, labels, n_classes)
    present = counts > 0
    # within - between = ||X||^2 - 2 sum_c n_c ||m_c||^2 + N ||m||^2
    weighted = float(np.sum(S[:, present] ** 2 / counts[present]))
    total = S.sum(axis=1)
    return 2.0 * _inner(X, X) - 2.0 * weighted + _inner(total, total) / X.shape[1]


def fisher_gradient(X, labels, n_classes=None):
    """Gradient of :func:`fisher_term` with respect to ``X``."""
    X = np.asarray(X, dtype=np.float64)
    S, counts, onehot = _class_sums(X, labels, n_classes)
    means = S / np.maximum(counts, 1)
    m = X.mean(axis=1, keepdims=True)
    return 4.0 * X - 4.0 * (means @ onehot.T) + 2.0 * m


def shared_scatter(X0):
    """``||X^0 - M^0||_F^2``: spread of the shared codes around their mean."""
    X0 = np.asarray(X0, dtype=np.float64)
    if X0.size == 0:
        return 0.0
    return float(np.sum((X0 - X0.mean(axis=1, keepdims=True)) ** 2))


def incoherence(D):
    """``sum_{c} sum_{i != c} ||D_i^T D_c||_F^2`` over all blocks including ``D_0``."""
    blocks = list(D.class_dicts) + ([D.shared] if D.n_shared else [])
    total = 0.0
    for c, Dc in enumerate(blocks):
        for i, Di in enumerate(blocks):
            if i != c:
                total += float(np.sum((Di.T @ Dc) ** 2))
    return total


def nuclear_norm(A):
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def fddl_objective(Y, D, X, labels, lambda1, lambda2):
    """FDDL cost for a dictionary without shared atoms."""
    if D.n_shared:
        raise ShapeMismatchError("FDDL dictionaries carry no shared block")
    g = fidelity(Y, D, X, labels, LEAK_DICT)
    h = fisher_term(X, labels, D.n_classes)
    return 0.5 * g + lambda1 * float(np.abs(X).sum()) + 0.5 * lambda2 * h


def copar_objective(Y, D, Xbar, labels, lambda1, lambda2):
    """COPAR cost: code-leakage fidelity plus sub-dictionary incoherence."""
    if not D.n_shared:
        raise ShapeMismatchError("COPAR needs a shared dictionary")
    g = fidelity(Y, D, Xbar, labels, LEAK_CODE)
    return 0.5 * g + lambda1 * float(np.abs(Xbar).sum()) + 0.5 * lambda2 * incoherence(D)


def lrsdl_objective(Y, D, Xbar, labels, lambda1, lambda2, eta):
    """LRSDL cost: FDDL-style terms, shared-code scatter and ``eta ||D_0||_*``."""
    if not D.n_shared:
        raise ShapeMismatchError("LRSDL needs a shared dictionary")
    g = fidelity(Y, D, Xbar, labels, LEAK_DICT)
    K = D.n_class_atoms
    h = fisher_term(Xbar[:K], labels, D.n_classes) + shared_scatter(Xbar[K:])
    return (0.5 * g + lambda1 * float(np.abs(Xbar).sum()) + 0.5 * lambda2 * h
            + eta * nuclear_norm(D.shared))


def objective(algorithm, Y, D, Xbar, labels, config):
    if algorithm == "fddl":
        return fddl_objective(Y, D, Xbar, labels, config.lambda1, config.lambda2)
    if algorithm == "copar":
        return copar_objective(Y, D, Xbar, labels, config.lambda1, config.lambda2)
    if algorithm == "lrsdl":
        return lrsdl_objective(Y, D, Xbar, labels, config.lambda1, config.lambda2, config.eta)
    raise ValueError(f"unknown algorithm {algorithm!r}")


# --------------------------------------------------------------------------
# Gram-form smooth parts used by the trainers
# --------------------------------------------------------------------------

class CodeSmooth:
    """Smooth part of the objective as a function of ``Xbar`` (dictionary fixed).

    Everything is expressed through ``G = D_bar^T D_bar`` and
    ``B = D_bar^T Y`` so each evaluation costs O(K^2 N) instead of O(n K N).
    """

    def __init__(self, algorithm, Y, D, labels, lambda2):
        spec = _KINDS[algorithm]
        self.leak = spec["leak"]
        self.fisher = spec["fisher"]
        self.shared_fisher = spec["shared_fisher"]
        self.lambda2 = float(lambda2)
        Dfull = D.full
        self.part = Partition.build(labels, D)
        self.labels = np.asarray(labels)
        self.C = D.n_classes
        self.G = Dfull.T @ Dfull
        self.B = Dfull.T @ Y
        self.yy = [float(np.sum(Y[:, cols] ** 2)) for cols in self.part.cols]
        self._own = [self.part.own_rows(c) for c in range(self.C)]
        self._Gown = [self.G[np.ix_(r, r)] for r in self._own]
        self._Gjj = [self.G[rows, rows] for rows in self.part.rows]

    def lipschitz_bound(self):
        norm = lambda A: float(np.linalg.norm(A, 2)) if A.size else 0.0  # noqa: E731
        L = norm(self.G) + max(norm(G) for G in self._Gown)
        L += max(norm(G) for G in self._Gjj) if self.leak == LEAK_DICT else 1.0
        if self.fisher:
            L += 2.0 * self.lambda2
        return L

    def __call__(self, Xbar, need_grad=True):
        part = self.part
        val = 0.0
        grad = np.zeros_like(Xbar) if need_grad else None
        for c, cols in enumerate(part.cols):
            Xc, Bc = Xbar[:, cols], self.B[:, cols]
            GX = self.G @ Xc
            val += self.yy[c] - 2.0 * _inner(Xc, Bc) + _inner(Xc, GX)
            gc = GX - Bc
            own = self._own[c]
            XS = Xc[own]
            GS = self._Gown[c] @ XS
            val += self.yy[c] - 2.0 * _inner(XS, Bc[own]) + _inner(XS, GS)
            gc[own] += GS - Bc[own]
            for j, rows in enumerate(part.rows):
                if j == c:
                    continue
                Xj = Xc[rows]
                LX = self._Gjj[j] @ Xj if self.leak == LEAK_DICT else Xj
                val += _inner(Xj, LX)
                gc[rows] += LX
            if need_grad:
                grad[:, cols] = gc
        val *= 0.5
        if self.fisher:
            K = part.n_class_atoms
            val += 0.5 * self.lambda2 * fisher_term(Xbar[:K], self.labels, self.C)
            if need_grad:
                grad[:K] += 0.5 * self.lambda2 * fisher_gradient(Xbar[:K], self.labels, self.C)
            if self.shared_fisher and part.shared.stop > K:
                X0 = Xbar[K:]
                dev = X0 - X0.mean(axis=1, keepdims=True)
                val += 0.5 * self.lambda2 * _inner(dev, dev)
                if need_grad:
                    grad[K:] += self.lambda2 * dev
        return (float(val), grad) if need_grad else float(val)


class DictSmooth:
    """Smooth part of the objective as a function of ``D_bar`` (codes fixed).

    Uses ``P = Y Xbar^T`` and ``Q = Xbar Xbar^T`` (and their per-class
    pieces); the gradient is returned for the full ``D_bar``.
    """

    def __init__(self, algorithm, Y, Xbar, labels, part, lambda2):
        spec = _KINDS[algorithm]
        self.leak = spec["leak"]
        self.incoherent = spec["incoherence"]
        self.lambda2 = float(lambda2)
        self.part = part
        self.yy = _inner(Y, Y)
        self.P = Y @ Xbar.T
        self.Q = Xbar @ Xbar.T
        self.Pc, self.Qc, self.yyc = [], [], []
        self._own = []
        for c, cols in enumerate(part.cols):
            own = part.own_rows(c)
            Yc, Xc = Y[:, cols], Xbar[:, cols]
            self._own.append(own)
            self.Pc.append(Yc @ Xc[own].T)
            self.Qc.append(Xc[own] @ Xc[own].T)
            self.yyc.append(_inner(Yc, Yc))
        # leakage weight for block j: codes of other classes on D_j
        self.leakQ = []
        for j, rows in enumerate(part.rows):
            other = np.concatenate([cols for c, cols in enumerate(part.cols) if c != j] or
                                   [np.array([], dtype=int)])
            Xo = Xbar[rows][:, other]
            self.leakQ.append(Xo @ Xo.T)
        self._blocks = list(part.rows) + ([part.shared] if part.shared.stop > part.shared.start else [])

    def lipschitz_bound(self, Dfull):
        norm = lambda A: float(np.linalg.norm(A, 2)) if A.size else 0.0  # noqa: E731
        L = norm(self.Q) + max(norm(Q) for Q in self.Qc)
        if self.leak == LEAK_DICT:
            L += max(norm(Q) for Q in self.leakQ)
        if self.incoherent:
            L += 6.0 * self.lambda2 * norm(Dfull.T @ Dfull)
        return L

    def __call__(self, Dfull, need_grad=True):
        GD = Dfull.T @ Dfull
        val = self.yy - 2.0 * _inner(Dfull, self.P) + _inner(GD, self.Q)
        grad = Dfull @ self.Q - self.P if need_grad else None
        for c in range(len(self.part.cols)):
            own = self._own[c]
            DS = Dfull[:, own]
            val += self.yyc[c] - 2.0 * _inner(DS, self.Pc[c]) + _inner(GD[np.ix_(own, own)], self.Qc[c])
            if need_grad:
                grad[:, own] += DS @ self.Qc[c] - self.Pc[c]
        if self.leak == LEAK_DICT:
            for j, rows in enumerate(self.part.rows):
                val += _inner(GD[rows, rows], self.leakQ[j])
                if need_grad:
                    grad[:, rows] += Dfull[:, rows] @ self.leakQ[j]
        val *= 0.5
        if self.incoherent:
            off = GD.copy()
            for blk in self._blocks:
                off[blk, blk] = 0.0
            val += 0.5 * self.lambda2 * _inner(off, off)
            if need_grad:
                grad += 2.0 * self.lambda2 * (Dfull @ off)
        return (float(val), grad) if need_grad else float(val)
