"""Multi-scale HOG descriptors over a Gaussian image pyramid."""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_image
from .exceptions import InvalidInputError, TooSmallError

MIN_LEVEL_SIZE = 8
NORM_EPS = 1e-10


@dataclass(frozen=True)
class PyramidSpec:
    levels: int = 2
    a: float = 0.375

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidInputError("pyramid needs at least one level")
        if np.any(self.kernel < 0):
            raise InvalidInputError(f"a={self.a} gives negative kernel weights")

    @property
    def kernel(self):
        a = self.a
        return np.array([0.25 - a / 2.0, 0.25, a, 0.25, 0.25 - a / 2.0])


@dataclass(frozen=True)
class HogSpec:
    cell: tuple = (4, 4)
    block: tuple = (2, 2)
    block_stride: tuple = (1, 1)
    bins: int = 9

    def __post_init__(self):
        if self.bins < 2:
            raise InvalidInputError("HOG needs at least 2 orientation bins")
        if any(b < s for b, s in zip(self.block, self.block_stride)):
            raise InvalidInputError("block must be at least as large as its stride")
        if min(self.cell + self.block + self.block_stride) < 1:
            raise InvalidInputError("cell, block and stride sizes must be positive")


def gaussian_pyramid(img, spec=PyramidSpec()):
    """Levels ``[img, down(img), ...]``; each step smooths then keeps every 2nd pixel."""
    img = check_image(img)
    w = spec.kernel
    shape = img.shape
    for k in range(spec.levels):
        if k:
            shape = (-(-shape[0] // 2), -(-shape[1] // 2))
        if min(shape) < MIN_LEVEL_SIZE:
            raise TooSmallError(
                f"{img.shape[0]}x{img.shape[1]} image cannot support {spec.levels} levels")
    levels = [img]
    for _ in range(spec.levels - 1):
        cur = levels[-1]
        smooth = ndimage.convolve1d(cur, w, axis=0, mode="reflect")
        smooth = ndimage.convolve1d(smooth, w, axis=1, mode="reflect")
        levels.append(smooth[::2, ::2].copy())
    return levels


def _grid(rows, cols, spec):
    cells_r, cells_c = rows // spec.cell[0], cols // spec.cell[1]
    blocks_r = (cells_r - spec.block[0]) // spec.block_stride[0] + 1 if cells_r >= spec.block[0] else 0
    blocks_c = (cells_c - spec.block[1]) // spec.block_stride[1] + 1 if cells_c >= spec.block[1] else 0
    return cells_r, cells_c, blocks_r, blocks_c


def hog_dim(rows, cols, spec=HogSpec()):
    """Length of :func:`hog` for an image of the given size."""
    _, _, blocks_r, blocks_c = _grid(rows, cols, spec)
    if blocks_r <= 0 or blocks_c <= 0:
        raise TooSmallError(f"{rows}x{cols} image holds no complete HOG block")
    return blocks_r * blocks_c * spec.block[0] * spec.block[1] * spec.bins


def gradients(img):
    """Centred differences ``[-1, 0, 1]`` with replicated borders."""
    p = np.pad(img, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def cell_histograms(img, spec=HogSpec()):
    """Magnitude-weighted orientation histograms, shape ``(cells_r, cells_c, bins)``.

    Orientations are unsigned in [0, 180) degrees; bin ``i`` is centred on
    ``i * 180 / bins`` and each pixel splits its vote linearly between the
    two nearest centres (wrapping at 180).
    """
    gx, gy = gradients(img)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    pos = theta * (spec.bins / np.pi)
    lo = np.floor(pos)
    frac = pos - lo
    lo = lo.astype(int) % spec.bins
    hi = (lo + 1) % spec.bins
    cells_r, cells_c, _, _ = _grid(*img.shape, spec)
    ch, cw = spec.cell
    rr, cc = cells_r * ch, cells_c * cw
    cell_id = (np.arange(rr)[:, None] // ch) * cells_c + (np.arange(cc)[None, :] // cw)
    nb = spec.bins
    hist = np.bincount((cell_id * nb + lo[:rr, :cc]).ravel(),
                       weights=(mag * (1.0 - frac))[:rr, :cc].ravel(),
                       minlength=cells_r * cells_c * nb)
    hist += np.bincount((cell_id * nb + hi[:rr, :cc]).ravel(),
                        weights=(mag * frac)[:rr, :cc].ravel(),
                        minlength=cells_r * cells_c * nb)
    return hist.reshape(cells_r, cells_c, nb)


def hog(img, spec=HogSpec()):
    """HOG descriptor: L2-normalised overlapping blocks, concatenated row-major."""
    img = check_image(img)
    rows, cols = img.shape
    hog_dim(rows, cols, spec)  # raises for images smaller than one block
    hist = cell_histograms(img, spec)
    _, _, blocks_r, blocks_c = _grid(rows, cols, spec)
    br, bc = spec.block
    sr, sc = spec.block_stride
    blocks = np.empty((blocks_r, blocks_c, br * bc * spec.bins))
    for i in range(blocks_r):
        for j in range(blocks_c):
            blocks[i, j] = hist[i * sr:i * sr + br, j * sc:j * sc + bc].ravel()
    norms = np.sqrt(np.sum(blocks * blocks, axis=2, keepdims=True) + NORM_EPS ** 2)
    out = np.where(norms > NORM_EPS, blocks / norms, 0.0)
    return out.ravel()


def extract_features(img, pspec=PyramidSpec(), hspec=HogSpec()):
    """Concatenated HOG descriptors of every pyramid level."""
    return np.concatenate([hog(level, hspec) for level in gaussian_pyramid(img, pspec)])


def feature_dim(rows, cols, pspec=PyramidSpec(), hspec=HogSpec()):
    total = 0
    for _ in range(pspec.levels):
        total += hog_dim(rows, cols, hspec)
        rows, cols = -(-rows // 2), -(-cols // 2)
    return total


class PyramidHOG(TransformerMixin, BaseEstimator):
    """Transformer from a stack of equally sized images to pyramid-HOG rows."""

    def __init__(self, levels=2, a=0.375, bins=9, cell=(4, 4), block=(2, 2),
                 block_stride=(1, 1)):
        self.levels = levels
        self.a = a
        self.bins = bins
        self.cell = cell
        self.block = block
        self.block_stride = block_stride

    def _specs(self):
        return (PyramidSpec(self.levels, self.a),
                HogSpec(tuple(self.cell), tuple(self.block), tuple(self.block_stride), self.bins))

    def fit(self, X, y=None):
        self._specs()
        return self

    def transform(self, X):
        pspec, hspec = self._specs()
        return np.stack([extract_features(img, pspec, hspec) for img in X])
