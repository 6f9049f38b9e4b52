"""Volume labelling, leave-three-out cross-validation and accuracy tables."""
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._validation import rng_for
from .dictlearn.classify import default_rule, predict
from .dictlearn.structure import TrainConfig
from .dictlearn.training import train
from .exceptions import InsufficientDataError, InvalidInputError, StageError

CLASSES = ("Normal", "DME", "AMD")
ABNORMAL = ("DME", "AMD")  # order is the tie-break order
DEFAULT_THRESHOLD = 0.04
DEFAULT_TRAINING_FRAMES = 10


@dataclass
class VolumeRecord:
    """One OCT volume: its class and per-B-scan feature rows.

    ``features`` has one row per B-scan in acquisition order. ``bscans``
    optionally keeps the source references (e.g. file paths) for reporting.
    """

    volume_id: str
    label: str
    features: np.ndarray
    training_frames: tuple = None
    bscans: list = None

    def __post_init__(self):
        if self.label not in CLASSES:
            raise InvalidInputError(f"volume {self.volume_id!r}: unknown class {self.label!r}")
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if self.features.shape[0] < 1:
            raise InvalidInputError(f"volume {self.volume_id!r} has no B-scans")

    @property
    def n_bscans(self):
        return self.features.shape[0]


def select_training_bscans(vol, k=DEFAULT_TRAINING_FRAMES):
    """Indices of the ``k`` B-scans used for training.

    Explicit ``training_frames`` win (the first ``k`` of them); otherwise the
    ``k`` consecutive B-scans centred on the volume midpoint.
    """
    n = vol.n_bscans
    if k < 1 or k > n:
        raise InvalidInputError(f"volume {vol.volume_id!r}: k={k} but it has {n} B-scans")
    if vol.training_frames:
        frames = [int(f) for f in vol.training_frames]
        if len(frames) < k:
            raise InvalidInputError(
                f"volume {vol.volume_id!r}: {len(frames)} annotated frames, {k} requested")
        if min(frames) < 0 or max(frames) >= n:
            raise InvalidInputError(f"volume {vol.volume_id!r}: annotated frame out of range")
        return frames[:k]
    start = (n - k) // 2
    return list(range(start, start + k))


def label_volume(bscan_labels, threshold=DEFAULT_THRESHOLD):
    """Volume class from per-B-scan labels.

    The abnormal class with the larger B-scan fraction wins if that fraction
    is positive and at least ``threshold``; DME wins ties. Otherwise Normal.
    """
    n = len(bscan_labels)
    if n == 0:
        raise InvalidInputError("cannot label a volume without B-scan labels")
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError(f"threshold must lie in [0, 1], got {threshold}")
    counts = Counter(bscan_labels)
    best = max(ABNORMAL, key=lambda c: (counts[c], -ABNORMAL.index(c)))
    frac = counts[best] / n
    return best if frac > 0 and frac >= threshold else "Normal"


def volume_accuracy(true_labels, predicted):
    """Per-class and whole accuracies (percent) of volume-level predictions."""
    true_labels, predicted = list(true_labels), list(predicted)
    per_class = {}
    for c in CLASSES:
        idx = [i for i, t in enumerate(true_labels) if t == c]
        if idx:
            per_class[c] = 100.0 * sum(predicted[i] == c for i in idx) / len(idx)
    correct = sum(t == p for t, p in zip(true_labels, predicted))
    whole = 100.0 * correct / len(true_labels) if true_labels else float("nan")
    return per_class, whole


def cv_folds(dataset, seed):
    """Test-set indices for each fold of one repetition.

    Each class's volumes are shuffled with a seeded permutation; fold ``f``
    holds out the ``f``-th volume of every class that still has one, so there
    are ``max(class size)`` folds and every volume is tested exactly once.
    """
    by_class = {c: [i for i, v in enumerate(dataset) if v.label == c] for c in CLASSES}
    missing = [c for c, idx in by_class.items() if not idx]
    if missing:
        raise InsufficientDataError(f"no volumes of class {', '.join(missing)}")
    orders = {c: [idx[j] for j in rng_for(seed, 0, ci).permutation(len(idx))]
              for ci, (c, idx) in enumerate(by_class.items())}
    n_folds = max(len(idx) for idx in orders.values())
    return [[orders[c][f] for c in CLASSES if f < len(orders[c])] for f in range(n_folds)]


@dataclass
class FoldResult:
    repetition: int
    fold: int
    seed: int
    test: list  # dicts: volume_id, label, bscan_labels

    def volume_predictions(self, threshold):
        return [(t["label"], label_volume(t["bscan_labels"], threshold)) for t in self.test]


@dataclass
class CvReport:
    """Cached per-B-scan predictions of every fold, aggregated at ``threshold``."""

    algorithm: str
    threshold: float
    seeds: list
    folds: list = field(default_factory=list)
    rule: str = None

    @property
    def repetitions(self):
        return len(self.seeds)

    def with_threshold(self, threshold):
        return CvReport(self.algorithm, threshold, list(self.seeds), self.folds, self.rule)

    def repetition_accuracy(self, r, threshold=None):
        threshold = self.threshold if threshold is None else threshold
        pairs = [p for f in self.folds if f.repetition == r for p in f.volume_predictions(threshold)]
        return volume_accuracy([t for t, _ in pairs], [p for _, p in pairs])

    def correct_count(self, threshold=None):
        """Correctly labelled volumes, averaged over repetitions."""
        threshold = self.threshold if threshold is None else threshold
        total = sum(t == p for f in self.folds for t, p in f.volume_predictions(threshold))
        return total / max(self.repetitions, 1)

    @property
    def per_class(self):
        runs = [self.repetition_accuracy(r)[0] for r in range(self.repetitions)]
        return {c: float(np.mean([run[c] for run in runs])) for c in CLASSES if c in runs[0]}

    @property
    def whole(self):
        return float(np.mean([self.repetition_accuracy(r)[1] for r in range(self.repetitions)]))

    def to_dict(self):
        folds = []
        for f in self.folds:
            folds.append({
                "repetition": f.repetition, "fold": f.fold, "seed": f.seed,
                "test": [dict(t, predicted=label_volume(t["bscan_labels"], self.threshold))
                         for t in f.test],
            })
        return {"algorithm": self.algorithm, "per_class": self.per_class, "whole": self.whole,
                "repetitions": self.repetitions, "seeds": list(self.seeds),
                "threshold": self.threshold, "rule": self.rule, "folds": folds}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        folds = [FoldResult(f["repetition"], f["fold"], f["seed"],
                            [{k: t[k] for k in ("volume_id", "label", "bscan_labels")}
                             for t in f["test"]])
                 for f in d["folds"]]
        return cls(d["algorithm"], d["threshold"], list(d["seeds"]), folds, d.get("rule"))


def _training_set(dataset, test_idx, k):
    held = set(test_idx)
    rows, labels = [], []
    for i, vol in enumerate(dataset):
        if i in held:
            continue
        frames = select_training_bscans(vol, k)
        rows.append(vol.features[frames])
        labels.extend([vol.label] * len(frames))
    if not rows:
        raise InsufficientDataError("no training volumes left in this fold")
    return np.vstack(rows), np.asarray(labels)


def leave_three_out_cv(dataset, algo, config=None, repetitions=1, threshold=DEFAULT_THRESHOLD,
                       seeds=None, rule=None, k=DEFAULT_TRAINING_FRAMES):
    """Repeated leave-three-out cross-validation of a dictionary learner.

    Repetition ``r`` shuffles with ``seeds[r]`` (default ``config.seed + r``).
    Each fold trains on ``k`` selected B-scans of every remaining volume and
    labels every B-scan of the held-out volumes. A failing fold raises
    :class:`StageError` naming the repetition and fold.
    """
    config = config or TrainConfig()
    seeds = list(seeds) if seeds is not None else [config.seed + r for r in range(repetitions)]
    if len(seeds) != repetitions:
        raise InvalidInputError(f"{repetitions} repetitions but {len(seeds)} seeds")
    rule = rule or default_rule(algo)
    report = CvReport(algo, threshold, seeds, rule=rule)
    for r, seed in enumerate(seeds):
        for f, test_idx in enumerate(cv_folds(dataset, seed)):
            fold_seed = int(rng_for(seed, 1, f).integers(2 ** 31))
            try:
                Y, labels = _training_set(dataset, test_idx, k)
                model = train(algo, Y.T, labels, config.replace(seed=fold_seed))
                test = []
                for i in test_idx:
                    vol = dataset[i]
                    idx, _ = predict(model, vol.features.T, rule)
                    test.append({"volume_id": vol.volume_id, "label": vol.label,
                                 "bscan_labels": [str(model.labels[j]) for j in idx]})
            except Exception as exc:
                raise StageError("crossval", f"repetition {r} fold {f}", exc) from exc
            report.folds.append(FoldResult(r, f, fold_seed, test))
    return report


def accuracy_table(reports):
    """Fixed-width table with one row per report and columns Normal/DME/AMD/Whole."""
    if isinstance(reports, CvReport):
        reports = [reports]
    head = f"{'Method':<8}" + "".join(f"{c:>9}" for c in CLASSES) + f"{'Whole':>9}"
    lines = [head]
    for rep in reports:
        pc = rep.per_class
        cells = "".join(f"{pc[c]:>9.2f}" if c in pc else f"{'-':>9}" for c in CLASSES)
        lines.append(f"{rep.algorithm.upper():<8}{cells}{rep.whole:>9.2f}")
    return "\n".join(lines)


def parse_thresholds(text):
    """``"start:stop:step"`` (inclusive stop) or a comma-separated list."""
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise InvalidInputError("threshold step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(t) for t in text.split(",") if t.strip()]


def threshold_sweep(report, thresholds):
    """``(threshold, correct volume count)`` pairs re-using cached B-scan predictions."""
    return [(float(t), report.correct_count(t)) for t in thresholds]


def sweep(dataset, algo, config=None, thresholds=None, **cv_kwargs):
    """Run cross-validation once and sweep the volume threshold over its predictions."""
    thresholds = parse_thresholds("0:0.4:0.01") if thresholds is None else thresholds
    report = leave_three_out_cv(dataset, algo, config, **cv_kwargs)
    return threshold_sweep(report, thresholds)
