"""Reading and writing single-channel 8/16-bit PNG and PGM B-scans."""
import re
from pathlib import Path

import numpy as np
from PIL import Image

from ..exceptions import FormatError

IMAGE_SUFFIXES = (".png", ".pgm")


def read_image(path):
    """Return intensities as float64 in ``[0, 2**bits - 1]``."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "I;16", "I;16B", "I;16L", "I"):
                raise FormatError(f"{path}: expected a single-channel image, got mode {im.mode}")
            arr = np.array(im)
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return arr.astype(np.float64)


def write_image(path, img, bits=8):
    """Round, clip to the bit depth and save; the suffix picks PNG or PGM."""
    top = 2 ** bits - 1
    arr = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, top)
    if bits == 8:
        Image.fromarray(arr.astype(np.uint8), mode="L").save(path)
    elif bits == 16:
        Image.fromarray(arr.astype(np.uint16)).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def to_uint8(img):
    """Min-max scale an arbitrary real image to 0..255."""
    img = np.asarray(img, dtype=np.float64)
    lo, hi = img.min(), img.max()
    if hi <= lo:
        return np.zeros(img.shape)
    return (img - lo) * (255.0 / (hi - lo))


def _natural_key(p):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", p.name)]


def list_bscans(directory):
    """Image files of a volume directory in natural (numeric-aware) order."""
    directory = Path(directory)
    files = [p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    return sorted(files, key=_natural_key)
