"""Synthetic union-of-subspaces data for tests and demos."""
from dataclasses import dataclass

import numpy as np

from .._validation import rng_for
from ..exceptions import InvalidInputError


@dataclass(frozen=True)
class SyntheticSpec:
    """``n_classes`` classes of ``n``-dimensional samples.

    Class ``c`` lives in ``span(U_c) + span(U_0)`` where ``U_c`` has
    ``class_dim`` columns and the shared basis ``U_0`` has ``shared_dim``.
    """

    n_classes: int = 3
    n: int = 64
    class_dim: int = 4
    shared_dim: int = 2
    samples_per_class: int = 100
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.class_dim + self.shared_dim > self.n:
            raise InvalidInputError("class_dim + shared_dim must not exceed n")
        if self.noise_std < 0:
            raise InvalidInputError("noise_std must be non-negative")
        if self.n_classes < 1 or self.samples_per_class < 1 or self.class_dim < 1:
            raise InvalidInputError("class count, sample count and class_dim must be positive")


@dataclass
class SyntheticData:
    Y: np.ndarray
    labels: np.ndarray
    class_bases: list
    shared_basis: np.ndarray
    shared_parts: np.ndarray


def generate_synthetic(spec, samples_per_class=None, stream=0):
    """Draw samples ``U_c a + U_0 b + noise`` with standard normal ``a``, ``b``.

    The bases are fixed by ``spec.seed``; ``stream`` selects an independent
    draw of coefficients and noise (e.g. 0 for training, 1 for testing).
    Class bases are mutually orthogonal and orthogonal to ``U_0`` whenever
    ``n_classes * class_dim + shared_dim <= n``; otherwise each class basis is
    only orthogonal to ``U_0``.
    """
    rng = rng_for(spec.seed, 0)
    C, n, k, k0 = spec.n_classes, spec.n, spec.class_dim, spec.shared_dim
    if C * k + k0 <= n:
        Q, _ = np.linalg.qr(rng.standard_normal((n, C * k + k0)))
        U0 = Q[:, C * k:]
        bases = [Q[:, c * k:(c + 1) * k] for c in range(C)]
    else:
        Q, _ = np.linalg.qr(rng.standard_normal((n, k0))) if k0 else (np.zeros((n, 0)), None)
        U0 = Q[:, :k0]
        bases = []
        for _ in range(C):
            A = rng.standard_normal((n, k))
            A -= U0 @ (U0.T @ A)
            bases.append(np.linalg.qr(A)[0])
    m = spec.samples_per_class if samples_per_class is None else samples_per_class
    draw = rng_for(spec.seed, 1, stream)
    Ys, labels, shared_parts = [], [], []
    for c in range(C):
        a = draw.standard_normal((k, m))
        b = draw.standard_normal((k0, m))
        sp = U0 @ b
        Ys.append(bases[c] @ a + sp + spec.noise_std * draw.standard_normal((n, m)))
        shared_parts.append(sp)
        labels.append(np.full(m, c))
    return SyntheticData(Y=np.hstack(Ys), labels=np.concatenate(labels), class_bases=bases,
                         shared_basis=U0, shared_parts=np.hstack(shared_parts))


def synthetic_volumes(spec, volumes_per_class=3, bscans_per_volume=20,
                      class_names=("Normal", "DME", "AMD")):
    """Volumes whose B-scan features are drawn from their class subspace.

    Volume ``j`` of class ``c`` uses coefficient stream ``c * volumes_per_class + j + 2``
    so it is independent of the ``generate_synthetic`` train/test streams.
    """
    from ..evaluation import VolumeRecord

    if spec.n_classes != len(class_names):
        raise InvalidInputError("spec.n_classes must match the number of class names")
    vols = []
    for c, name in enumerate(class_names):
        for j in range(volumes_per_class):
            data = generate_synthetic(spec, bscans_per_volume,
                                      stream=c * volumes_per_class + j + 2)
            feats = data.Y[:, data.labels == c].T
            vols.append(VolumeRecord(f"{name}{j:02d}", name, feats))
    return vols


def synthetic_bscan(rows=200, cols=420, curvature=None, offset=None, seed=0, noise=5.0,
                    return_rpe=False):
    """Toy B-scan: dim retinal layers above a bright parabolic RPE band.

    The default curvature is drawn so the band sags toward the bottom of the
    image in the middle, which keeps it on the lower border of its convex hull.

    The two brightest pixels of every column are the RPE rows ``r(j)`` and
    ``r(j) - 1``, so ``r`` is the ground-truth RPE curve (returned with
    ``return_rpe=True``). Intensities are 8-bit scale with additive noise.
    """
    rng = rng_for(seed, 2)
    if curvature is None:
        curvature = -rng.uniform(0.0, 1.0) * 40.0 / (cols / 2) ** 2
    if offset is None:
        offset = rng.uniform(0.55, 0.75) * rows
    j = np.arange(cols)
    rpe = np.rint(offset + curvature * (j - cols / 2) ** 2).astype(int)
    rpe = np.clip(rpe, 70, rows - 6)
    r = np.arange(rows)[:, None]
    img = np.full((rows, cols), 20.0)
    depth = rpe[None, :] - r
    img[(depth > 1) & (depth < 60)] = 90.0
    img[(depth > 25) & (depth < 35)] = 130.0
    img[(depth == 0) | (depth == 1)] = 240.0
    img += noise * np.abs(rng.standard_normal((rows, cols)))
    img = np.clip(img, 0, 235.0 + (depth[...] <= 1) * (depth >= 0) * 20)
    return (img, rpe) if return_rpe else img
