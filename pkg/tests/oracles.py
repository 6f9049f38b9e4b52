"""Independent reference implementations used only by the tests.

Everything here is written with explicit loops over entries so it shares no
code path with the vectorised package implementation.
"""
import itertools

import numpy as np


def frob2(A):
    total = 0.0
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            total += A[i, j] * A[i, j]
    return total


def matmul(A, B):
    out = np.zeros((A.shape[0], B.shape[1]))
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            s = 0.0
            for k in range(A.shape[1]):
                s += A[i, k] * B[k, j]
            out[i, j] = s
    return out


def abs_sum(A):
    return sum(abs(v) for v in np.ravel(A))


def col_mean(A):
    out = np.zeros((A.shape[0], 1))
    for i in range(A.shape[0]):
        out[i, 0] = sum(A[i, j] for j in range(A.shape[1])) / A.shape[1]
    return out


def lasso_objective(D, y, x, lam):
    r = y - D @ x
    return float(r @ r + lam * np.abs(x).sum())


def lasso_enumeration(D, y, lam, max_support=3):
    """Best objective over every support of size <= max_support and every sign pattern.

    For a fixed support S and signs s the problem is an unconstrained
    quadratic with minimiser ``(D_S^T D_S)^{-1} (D_S^T y - lam s / 2)``; its
    true objective is an upper bound on the lasso optimum.
    """
    best = float(y @ y)
    for k in range(1, max_support + 1):
        for S in itertools.combinations(range(D.shape[1]), k):
            DS = D[:, S]
            G = DS.T @ DS
            if np.linalg.cond(G) > 1e12:
                continue
            for signs in itertools.product((-1.0, 1.0), repeat=k):
                xs = np.linalg.solve(G, DS.T @ y - 0.5 * lam * np.asarray(signs))
                x = np.zeros(D.shape[1])
                x[list(S)] = xs
                best = min(best, lasso_objective(D, y, x, lam))
    return best


def _blocks(D):
    return list(D.class_dicts) + [D.shared]


def _split(Xbar, D):
    edges = np.cumsum([0] + D.atom_counts + [D.n_shared])
    return [Xbar[edges[i]:edges[i + 1]] for i in range(len(edges) - 1)]


def fidelity_loop(Y, D, Xbar, labels, leak):
    blocks = _blocks(D)
    C = D.n_classes
    Dfull = np.hstack(blocks)
    total = 0.0
    for c in range(C):
        cols = [j for j, l in enumerate(labels) if l == c]
        Yc = Y[:, cols]
        Xc = Xbar[:, cols]
        parts = _split(Xc, D)
        total += frob2(Yc - matmul(Dfull, Xc))
        own = matmul(blocks[c], parts[c])
        if D.n_shared:
            own = own + matmul(blocks[C], parts[C])
        total += frob2(Yc - own)
        for j in range(C):
            if j != c:
                total += frob2(matmul(blocks[j], parts[j]) if leak == "dict" else parts[j])
    return total


def fisher_loop(X, labels, C):
    m = col_mean(X)
    total = frob2(X)
    for c in range(C):
        cols = [j for j, l in enumerate(labels) if l == c]
        Xc = X[:, cols]
        mc = col_mean(Xc)
        total += frob2(Xc - mc)
        total -= len(cols) * frob2(mc - m)
    return total


def incoherence_loop(D):
    blocks = [b for b in _blocks(D) if b.shape[1]]
    total = 0.0
    for c, Dc in enumerate(blocks):
        for i, Di in enumerate(blocks):
            if i != c:
                total += frob2(matmul(Di.T, Dc))
    return total


def fddl_loop(Y, D, X, labels, l1, l2):
    return 0.5 * fidelity_loop(Y, D, X, labels, "dict") + l1 * abs_sum(X) \
        + 0.5 * l2 * fisher_loop(X, labels, D.n_classes)


def copar_loop(Y, D, Xbar, labels, l1, l2):
    return 0.5 * fidelity_loop(Y, D, Xbar, labels, "code") + l1 * abs_sum(Xbar) \
        + 0.5 * l2 * incoherence_loop(D)


def lrsdl_loop(Y, D, Xbar, labels, l1, l2, eta):
    K = D.n_class_atoms
    X0 = Xbar[K:]
    h = fisher_loop(Xbar[:K], labels, D.n_classes) + frob2(X0 - col_mean(X0))
    nuc = float(np.sum(np.linalg.svd(D.shared, compute_uv=False)))
    return 0.5 * fidelity_loop(Y, D, Xbar, labels, "dict") + l1 * abs_sum(Xbar) \
        + 0.5 * l2 * h + eta * nuc


def central_difference(f, x, step=1e-5):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp, xm = x.copy(), x.copy()
        xp[idx] += step
        xm[idx] -= step
        g[idx] = (f(xp) - f(xm)) / (2 * step)
    return g
