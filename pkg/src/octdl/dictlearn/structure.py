"""Containers for structured dictionaries, codes and trained models."""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .._validation import check_matrix, rng_for
from ..exceptions import InsufficientDataError, InvalidInputError, ShapeMismatchError

ALGORITHMS = ("copar", "fddl", "lrsdl")


@dataclass
class StructuredDictionary:
    """Class sub-dictionaries ``D_1..D_C`` plus an optional shared ``D_0``.

    Atoms of the full dictionary ``D_bar = [D_1, ..., D_C, D_0]`` are stored in
    that order, so rows of a code matrix ``X_bar`` are laid out the same way.
    """

    class_dicts: list
    shared: np.ndarray = None
    labels: list = None

    def __post_init__(self):
        self.class_dicts = [np.asarray(d, dtype=np.float64) for d in self.class_dicts]
        n = self.class_dicts[0].shape[0]
        if self.shared is None:
            self.shared = np.zeros((n, 0))
        self.shared = np.asarray(self.shared, dtype=np.float64).reshape(n, -1)
        if any(d.shape[0] != n for d in self.class_dicts):
            raise ShapeMismatchError("all sub-dictionaries must share the feature dimension")
        if self.labels is None:
            self.labels = list(range(len(self.class_dicts)))

    @property
    def n_features(self):
        return self.shared.shape[0]

    @property
    def n_classes(self):
        return len(self.class_dicts)

    @property
    def atom_counts(self):
        return [d.shape[1] for d in self.class_dicts]

    @property
    def n_shared(self):
        return self.shared.shape[1]

    @property
    def n_class_atoms(self):
        return sum(self.atom_counts)

    @property
    def n_atoms(self):
        return self.n_class_atoms + self.n_shared

    @property
    def class_part(self):
        return np.hstack(self.class_dicts)

    @property
    def full(self):
        return np.hstack(self.class_dicts + [self.shared])

    def row_slices(self):
        """Slices of ``X_bar`` rows for each class block, then the shared block."""
        out, start = [], 0
        for k in self.atom_counts:
            out.append(slice(start, start + k))
            start += k
        shared = slice(start, start + self.n_shared)
        return out, shared

    @classmethod
    def from_full(cls, full, atom_counts, n_shared, labels=None):
        full = np.asarray(full, dtype=np.float64)
        edges = np.cumsum([0] + list(atom_counts))
        dicts = [full[:, edges[i]:edges[i + 1]].copy() for i in range(len(atom_counts))]
        shared = full[:, edges[-1]:edges[-1] + n_shared].copy()
        return cls(dicts, shared, labels)


@dataclass
class Partition:
    """Column groups per class and atom-row groups per sub-dictionary."""

    cols: list
    rows: list
    shared: slice
    n_atoms: int

    @classmethod
    def build(cls, labels, dictionary):
        labels = np.asarray(labels)
        C = dictionary.n_classes
        if labels.size and (labels.min() < 0 or labels.max() >= C):
            raise ShapeMismatchError("class indices out of range for the dictionary")
        rows, shared = dictionary.row_slices()
        cols = [np.flatnonzero(labels == c) for c in range(C)]
        return cls(cols=cols, rows=rows, shared=shared, n_atoms=dictionary.n_atoms)

    @property
    def n_classes(self):
        return len(self.cols)

    def own_rows(self, c):
        r = np.arange(self.rows[c].start, self.rows[c].stop)
        s = np.arange(self.shared.start, self.shared.stop)
        return np.concatenate([r, s])

    @property
    def n_class_atoms(self):
        return self.shared.start


@dataclass
class ClassStats:
    """Mean codes: ``class_means[c]`` over class-dictionary rows, ``shared_mean`` over D_0 rows."""

    class_means: np.ndarray
    shared_mean: np.ndarray

    @classmethod
    def from_codes(cls, Xbar, part):
        K = part.n_class_atoms
        means = np.stack([Xbar[:K, cols].mean(axis=1) if cols.size else np.zeros(K)
                          for cols in part.cols], axis=0)
        X0 = Xbar[part.shared]
        m0 = X0.mean(axis=1) if X0.shape[1] else np.zeros(X0.shape[0])
        return cls(class_means=means, shared_mean=m0)


@dataclass
class TrainConfig:
    """Hyperparameters for the three learners.

    ``lambda1``/``lambda2`` weight sparsity and the discriminative term,
    ``eta`` the nuclear norm of ``D_0`` (LRSDL), ``gamma`` the test-time code
    penalty (GC / LC rules) and ``w`` the residual weight of the LRSDL rule.
    """

    lambda1: float = 0.01
    lambda2: float = 0.01
    eta: float = 0.1
    gamma: float = 0.01
    w: float = 0.5
    n_atoms: int = 32
    n_shared: int = 16
    outer_iters: int = 50
    tol: float = 1e-5
    seed: int = 0
    code_iters: int = 30
    dict_iters: int = 10

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "eta", "gamma", "tol"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InvalidInputError(f"{name} must be non-negative, got {v}")
        if not 0.0 <= self.w <= 1.0:
            raise InvalidInputError(f"w must lie in [0, 1], got {self.w}")
        if self.n_atoms < 1 or self.n_shared < 0 or self.outer_iters < 0:
            raise InvalidInputError("atom counts and iteration counts must be non-negative")

    def replace(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)


@dataclass
class TrainedModel:
    dictionary: StructuredDictionary
    stats: ClassStats
    config: TrainConfig
    algorithm: str
    objective_trace: list = field(default_factory=list)
    codes: np.ndarray = None

    @property
    def labels(self):
        return self.dictionary.labels


def normalize_columns(A):
    norms = np.linalg.norm(A, axis=0)
    out = A.copy()
    nz = norms > 0
    out[:, nz] /= norms[nz]
    return out


def project_unit_ball(A):
    """Scale every column with norm > 1 back onto the unit sphere."""
    norms = np.linalg.norm(A, axis=0)
    return A / np.maximum(norms, 1.0)


def init_dictionary(Y, labels, n_atoms, n_shared=0, seed=0, class_names=None):
    """Seeded initial dictionary built from normalised training columns.

    One permutation of all sample indices is drawn; ``D_c`` takes the first
    ``n_atoms`` class-``c`` samples in that order and ``D_0`` the first
    ``n_shared`` samples of a second permutation. Because the draw is over
    samples rather than classes, relabelling the classes only relabels the
    sub-dictionaries.
    """
    Y = check_matrix(Y, "Y")
    labels = np.asarray(labels)
    if labels.shape != (Y.shape[1],):
        raise ShapeMismatchError("labels must give one class index per column of Y")
    C = int(labels.max()) + 1 if labels.size else 0
    counts = [n_atoms] * C if np.isscalar(n_atoms) else list(n_atoms)
    nonzero = np.linalg.norm(Y, axis=0) > 0
    perm = rng_for(seed, 0).permutation(Y.shape[1])
    perm = perm[nonzero[perm]]
    dicts = []
    for c in range(C):
        pick = perm[labels[perm] == c][:counts[c]]
        if pick.size < counts[c]:
            raise InsufficientDataError(
                f"class {c} has {pick.size} usable samples, {counts[c]} atoms requested")
        dicts.append(normalize_columns(Y[:, pick]))
    shared = np.zeros((Y.shape[0], 0))
    if n_shared:
        perm0 = rng_for(seed, 1).permutation(Y.shape[1])
        perm0 = perm0[nonzero[perm0]][:n_shared]
        if perm0.size < n_shared:
            raise InsufficientDataError(
                f"{perm0.size} usable samples, {n_shared} shared atoms requested")
        shared = normalize_columns(Y[:, perm0])
    return StructuredDictionary(dicts, shared, class_names)
