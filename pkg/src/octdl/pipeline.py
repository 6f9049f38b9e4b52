"""End-to-end pipeline: raw B-scans -> crops -> features -> model / CV report.

Layout under ``out_dir``::

    crops/<volume_id>/<index>.png     16-bit flattened 65 x 380 crops
    features.bin                      DLF1 feature file
    model.dlm                         DLM1 model (stage "train")
    report.json                       CV report (stage "crossval")

Every artifact gets a ``<name>.meta.json`` sidecar recording the tool
version, the stage and a hash of the configuration that produced it.
"""
import hashlib
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dictlearn.structure import TrainConfig
from .dictlearn.training import train
from .evaluation import DEFAULT_THRESHOLD, DEFAULT_TRAINING_FRAMES, VolumeRecord, leave_three_out_cv
from .exceptions import StageError
from .features import HogSpec, PyramidSpec, extract_features
from .io.formats import FeatureSet, read_features, write_features, write_model
from .io.images import list_bscans, read_image, write_image
from .io.manifest import load_manifest
from .preprocess import preprocess_bscan

log = logging.getLogger(__name__)

STAGES = ("preprocess", "features", "train", "crossval")
CROP_BITS = 16


@dataclass
class PipelineConfig:
    degree: int = 2
    method: str = "hull"
    fraction: float = 0.3
    n_components: int = 3
    em_iters: int = 100
    denoise: bool = True
    levels: int = 2
    bins: int = 9
    algorithm: str = "fddl"
    rule: str = None
    repetitions: int = 1
    threshold: float = DEFAULT_THRESHOLD
    training_frames: int = DEFAULT_TRAINING_FRAMES
    train: TrainConfig = field(default_factory=TrainConfig)

    def as_dict(self):
        return asdict(self)

    def digest(self, keys=None):
        """SHA-256 of the (selected) configuration fields in canonical JSON."""
        d = self.as_dict()
        if keys is not None:
            d = {k: d[k] for k in keys}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


# configuration fields each stage depends on (including upstream stages)
_PRE_KEYS = ("degree", "method", "fraction", "n_components", "em_iters", "denoise")
_FEAT_KEYS = _PRE_KEYS + ("levels", "bins")
_STAGE_KEYS = {
    "preprocess": _PRE_KEYS,
    "features": _FEAT_KEYS,
    "train": _FEAT_KEYS + ("algorithm", "train"),
    "crossval": _FEAT_KEYS + ("algorithm", "rule", "repetitions", "threshold",
                              "training_frames", "train"),
}


def write_stamp(artifact, stage, config):
    meta = {"stage": stage, "version": __version__,
            "config_hash": config.digest(_STAGE_KEYS[stage])}
    Path(f"{artifact}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def _bscan_index(path):
    m = re.search(r"(\d+)(?!.*\d)", path.stem)
    return int(m.group(1)) if m else None


def volume_files(vol_id, directory):
    """B-scan files of a volume keyed by index; a gap in the numbering is an error."""
    files = list_bscans(directory)
    if not files:
        raise StageError("preprocess", f"volume {vol_id}", FileNotFoundError("no B-scan images"))
    indexed = [(_bscan_index(p), p) for p in files]
    if any(i is None for i, _ in indexed):
        return list(enumerate(files))
    indexed.sort()
    first = indexed[0][0]
    for expected, (i, _) in enumerate(indexed, start=first):
        if i != expected:
            raise StageError("preprocess", f"volume {vol_id} B-scan {expected}",
                             FileNotFoundError(f"B-scan {expected} missing from {directory}"))
    return [(i - first, p) for i, p in indexed]


def run_preprocess(manifest, out_dir, config):
    crops_root = Path(out_dir) / "crops"
    for row in manifest:
        vol_dir = crops_root / row.volume_id
        vol_dir.mkdir(parents=True, exist_ok=True)
        for idx, path in volume_files(row.volume_id, row.path):
            try:
                crop = preprocess_bscan(read_image(path), degree=config.degree,
                                        method=config.method, fraction=config.fraction,
                                        n_components=config.n_components,
                                        em_iters=config.em_iters, denoise=config.denoise)
            except Exception as exc:
                raise StageError("preprocess", f"volume {row.volume_id} B-scan {idx}", exc) from exc
            write_image(vol_dir / f"{idx:04d}.png", _rescale(crop), bits=CROP_BITS)
        log.info("preprocessed volume %s", row.volume_id)
    write_stamp(crops_root, "preprocess", config)
    return crops_root


def _rescale(img):
    lo, hi = float(img.min()), float(img.max())
    top = 2 ** CROP_BITS - 1
    return np.zeros(img.shape) if hi <= lo else (img - lo) * (top / (hi - lo))


def run_features(manifest, crops_root, out_path, config):
    pspec = PyramidSpec(levels=config.levels)
    hspec = HogSpec(bins=config.bins)
    rows, vids, idxs, labels = [], [], [], []
    for row in manifest:
        for idx, path in volume_files(row.volume_id, Path(crops_root) / row.volume_id):
            try:
                rows.append(extract_features(read_image(path), pspec, hspec))
            except Exception as exc:
                raise StageError("features", f"volume {row.volume_id} B-scan {idx}", exc) from exc
            vids.append(row.volume_id)
            idxs.append(idx)
            labels.append(row.label)
    fs = FeatureSet(np.vstack(rows), vids, idxs, labels)
    write_features(out_path, fs)
    write_stamp(out_path, "features", config)
    return fs


def volumes_from_features(fs, manifest=None):
    """Group feature rows into :class:`VolumeRecord` objects (B-scans in index order)."""
    frames = {r.volume_id: r.frames for r in manifest} if manifest is not None else {}
    order, groups = [], {}
    for i, vid in enumerate(fs.volume_ids):
        if vid not in groups:
            order.append(vid)
            groups[vid] = []
        groups[vid].append(i)
    vols = []
    for vid in order:
        rows = sorted(groups[vid], key=lambda i: fs.bscan_indices[i])
        vols.append(VolumeRecord(vid, fs.labels[rows[0]], fs.X[rows],
                                 training_frames=frames.get(vid)))
    return vols


def _training_matrix(vols, k):
    from .evaluation import select_training_bscans

    Y = np.vstack([v.features[select_training_bscans(v, k)] for v in vols])
    labels = np.concatenate([[v.label] * k for v in vols])
    return Y, labels


def run_pipeline(manifest, out_dir, stages=STAGES, config=None):
    """Run the requested stages in order; returns a dict of produced artifact paths.

    Later stages read what earlier stages wrote, so a stage can be re-run on
    its own once its inputs exist.
    """
    config = config or PipelineConfig()
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ValueError(f"unknown stages {unknown}; choose from {STAGES}")
    if isinstance(manifest, (str, Path)):
        manifest = load_manifest(manifest)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    crops_root = out_dir / "crops"
    feat_path = out_dir / "features.bin"
    produced = {}
    if "preprocess" in stages:
        produced["crops"] = run_preprocess(manifest, out_dir, config)
    if "features" in stages:
        run_features(manifest, crops_root, feat_path, config)
        produced["features"] = feat_path
    if "train" in stages or "crossval" in stages:
        vols = volumes_from_features(read_features(feat_path), manifest)
    if "train" in stages:
        Y, labels = _training_matrix(vols, config.training_frames)
        try:
            model = train(config.algorithm, Y.T, labels, config.train)
        except Exception as exc:
            raise StageError("train", "training set", exc) from exc
        path = out_dir / "model.dlm"
        write_model(path, model)
        write_stamp(path, "train", config)
        produced["model"] = path
    if "crossval" in stages:
        report = leave_three_out_cv(vols, config.algorithm, config.train,
                                    repetitions=config.repetitions, threshold=config.threshold,
                                    rule=config.rule, k=config.training_frames)
        path = out_dir / "report.json"
        path.write_text(report.to_json(indent=2) + "\n")
        write_stamp(path, "crossval", config)
        produced["report"] = path
    return produced
