"""Dataset manifest: one tab-separated row per OCT volume.

Header ``volume_id<TAB>class<TAB>path<TAB>frames``. ``path`` is a directory of
per-B-scan images (resolved relative to the manifest file) and ``frames`` an
optional comma-separated list of training B-scan indices.
"""
import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import DuplicateVolumeError, ManifestError, MissingDirectoryError, UnknownClassError

CLASSES = ("Normal", "DME", "AMD")
HEADER = ("volume_id", "class", "path", "frames")


@dataclass(frozen=True)
class ManifestRow:
    volume_id: str
    label: str
    path: Path
    frames: tuple = None
    row: int = 0


@dataclass
class DatasetManifest:
    rows: list
    root: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def class_counts(self):
        counts = Counter(r.label for r in self.rows)
        return {c: counts.get(c, 0) for c in CLASSES}


def _parse_frames(text, row):
    text = text.strip()
    if not text:
        return None
    try:
        frames = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise ManifestError(f"frames must be comma-separated integers, got {text!r}", row) from None
    if any(f < 0 for f in frames):
        raise ManifestError("frame indices must be non-negative", row)
    return frames


def load_manifest(path, check_dirs=True):
    """Parse and validate a manifest; row numbers in errors count the header as row 1."""
    path = Path(path)
    root = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter="\t")
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header[:4]) != HEADER:
            raise ManifestError(f"header must be {'<TAB>'.join(HEADER)}", 1)
        rows, seen = [], {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) < 3:
                raise ManifestError("expected at least volume_id, class and path", lineno)
            vid, label, rel = rec[0].strip(), rec[1].strip(), rec[2].strip()
            if label not in CLASSES:
                raise UnknownClassError(f"unknown class {label!r}; expected one of {CLASSES}", lineno)
            if vid in seen:
                raise DuplicateVolumeError(
                    f"duplicate volume_id {vid!r} (first seen on row {seen[vid]})", lineno)
            seen[vid] = lineno
            directory = (root / rel).resolve()
            if check_dirs and not directory.is_dir():
                raise MissingDirectoryError(f"directory {str(directory)!r} does not exist", lineno)
            frames = _parse_frames(rec[3] if len(rec) > 3 else "", lineno)
            rows.append(ManifestRow(vid, label, directory, frames, lineno))
    return DatasetManifest(rows=rows, root=root)


def write_manifest(path, rows):
    """Write ``(volume_id, class, path, frames)`` tuples under the standard header."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(HEADER)
        for vid, label, p, frames in rows:
            w.writerow([vid, label, str(p), ",".join(map(str, frames or ()))])
