"""Small input-validation helpers shared by the public functions."""
import numpy as np

from .exceptions import InvalidInputError, ShapeMismatchError


def check_image(img, name="img", min_rows=1, min_cols=1):
    """Return ``img`` as a finite 2-D float64 array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_rows or arr.shape[1] < min_cols:
        raise ShapeMismatchError(
            f"{name} must be at least {min_rows}x{min_cols}, got {arr.shape[0]}x{arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_matrix(a, name, ndim=2):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeMismatchError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_same_rows(a, b, names):
    if a.shape[0] != b.shape[0]:
        raise ShapeMismatchError(
            f"{names[0]} has {a.shape[0]} rows but {names[1]} has {b.shape[0]}")


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise InvalidInputError(f"{name} must be a finite non-negative number, got {value}")
    return value


def rng_for(seed, *stream):
    """Deterministic generator for ``(seed, *stream)``.

    Every random draw in the package goes through here: a PCG64 generator
    seeded by ``SeedSequence([seed, *stream])``. Distinct stream ids (fold
    index, repetition index, ...) give independent streams, so results do not
    depend on the order in which parallel work is scheduled.
    """
    entropy = [int(seed) & 0xFFFFFFFF] + [int(s) & 0xFFFFFFFF for s in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
