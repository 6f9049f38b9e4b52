import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from octdl.dictlearn import TrainConfig
from octdl.evaluation import (
    CLASSES,
    CvReport,
    FoldResult,
    VolumeRecord,
    accuracy_table,
    cv_folds,
    label_volume,
    leave_three_out_cv,
    parse_thresholds,
    select_training_bscans,
    threshold_sweep,
    volume_accuracy,
)
from octdl.exceptions import InsufficientDataError, InvalidInputError, StageError
from octdl.io import SyntheticSpec, synthetic_volumes


def volume(n, label="Normal", frames=None, vid="v"):
    return VolumeRecord(vid, label, np.zeros((n, 2)), training_frames=frames)


def recount(labels, threshold):
    n = len(labels)
    fd = sum(1 for l in labels if l == "DME") / n
    fa = sum(1 for l in labels if l == "AMD") / n
    best, frac = ("DME", fd) if fd >= fa else ("AMD", fa)
    return best if frac > 0 and frac >= threshold else "Normal"


def test_select_training_bscans():
    assert select_training_bscans(volume(100), 10) == list(range(45, 55))
    assert select_training_bscans(volume(20, frames=(3, 7, 9)), 3) == [3, 7, 9]
    with pytest.raises(InvalidInputError):
        select_training_bscans(volume(100), 101)
    with pytest.raises(InvalidInputError):
        select_training_bscans(volume(5, frames=(1, 9)), 2)


def test_label_volume_examples():
    assert label_volume(["DME"] * 5 + ["Normal"] * 95, 0.04) == "DME"
    assert label_volume(["AMD"] * 3 + ["Normal"] * 97, 0.04) == "Normal"
    assert label_volume(["DME"] * 4 + ["AMD"] * 4 + ["Normal"] * 92, 0.04) == "DME"
    assert label_volume(["AMD"] + ["Normal"] * 99, 0.0) == "AMD"
    assert label_volume(["Normal"] * 10, 0.0) == "Normal"
    with pytest.raises(InvalidInputError):
        label_volume([], 0.04)


@given(st.lists(st.sampled_from(CLASSES), min_size=1, max_size=60), st.floats(0, 1))
@settings(max_examples=1000, deadline=None)
def test_label_volume_matches_recount(labels, threshold):
    assert label_volume(labels, threshold) == recount(labels, threshold)


@given(st.lists(st.tuples(st.sampled_from(CLASSES), st.sampled_from(CLASSES)), min_size=1,
                max_size=40))
def test_volume_accuracy_matches_confusion_matrix(pairs):
    true, pred = zip(*pairs)
    conf = Counter(pairs)
    per_class, whole = volume_accuracy(true, pred)
    for c in CLASSES:
        total = sum(v for (t, _), v in conf.items() if t == c)
        if total:
            assert per_class[c] == pytest.approx(100 * conf[(c, c)] / total)
    assert whole == pytest.approx(100 * sum(conf[(c, c)] for c in CLASSES) / len(pairs))


def fake_report(pred_by_class):
    test = []
    for label, preds in pred_by_class.items():
        for i, p in enumerate(preds):
            test.append({"volume_id": f"{label}{i}", "label": label, "bscan_labels": [p] * 10})
    return CvReport("fddl", 0.04, [0], [FoldResult(0, 0, 0, test)])


def test_accuracy_table_examples():
    perfect = fake_report({c: [c] * 15 for c in CLASSES})
    assert perfect.per_class == {c: 100.0 for c in CLASSES} and perfect.whole == 100.0
    one_off = fake_report({"Normal": ["Normal"] * 15, "DME": ["DME"] * 14 + ["Normal"],
                           "AMD": ["AMD"] * 15})
    table = accuracy_table(one_off).splitlines()
    assert table[0].split() == ["Method", "Normal", "DME", "AMD", "Whole"]
    assert table[1].split() == ["FDDL", "100.00", "93.33", "100.00", "97.78"]


def test_cv_folds_partition_property():
    vols = [volume(3, c, vid=f"{c}{i}") for c in CLASSES for i in range(5)]
    vols += [volume(3, "DME", vid="extra")]
    for seed in range(5):
        folds = cv_folds(vols, seed)
        assert len(folds) == 6
        flat = [i for f in folds for i in f]
        assert sorted(flat) == list(range(len(vols)))
        for f in folds:
            assert len({vols[i].label for i in f}) == len(f)
    assert len(cv_folds([volume(2, c, vid=c) for c in CLASSES], 0)) == 1
    with pytest.raises(InsufficientDataError):
        cv_folds([volume(2, "DME")], 0)


def test_cv_45_volumes_has_15_folds():
    vols = [volume(3, c, vid=f"{c}{i}") for c in CLASSES for i in range(15)]
    folds = cv_folds(vols, 0)
    assert len(folds) == 15 and all(len(f) == 3 for f in folds)


@pytest.fixture(scope="module")
def synthetic_dataset():
    spec = SyntheticSpec(n=32, class_dim=3, shared_dim=0, noise_std=0.05, seed=3)
    return synthetic_volumes(spec, volumes_per_class=3, bscans_per_volume=12)


def test_cv_report_determinism_and_schema(synthetic_dataset):
    cfg = TrainConfig(n_atoms=3, outer_iters=5)
    rep = leave_three_out_cv(synthetic_dataset, "fddl", cfg, repetitions=2, seeds=[4, 4], k=6)
    d = rep.to_dict()
    assert set(d) >= {"algorithm", "per_class", "whole", "repetitions", "seeds", "threshold", "folds"}
    r0 = [f for f in rep.folds if f.repetition == 0]
    r1 = [f for f in rep.folds if f.repetition == 1]
    assert [(f.seed, f.test) for f in r0] == [(f.seed, f.test) for f in r1]
    again = CvReport.from_dict(json.loads(rep.to_json()))
    assert again.to_dict() == d
    for r in range(2):
        tested = [t["volume_id"] for f in rep.folds if f.repetition == r for t in f.test]
        assert sorted(tested) == sorted(v.volume_id for v in synthetic_dataset)
    assert 0 <= rep.whole <= 100


def test_cv_failure_names_fold(synthetic_dataset):
    with pytest.raises(StageError) as info:
        leave_three_out_cv(synthetic_dataset, "fddl", TrainConfig(n_atoms=50, outer_iters=2), k=6)
    assert "repetition 0 fold 0" in str(info.value)


def test_threshold_sweep_uses_cached_predictions():
    test = [{"volume_id": f"v{i}", "label": "DME",
             "bscan_labels": ["DME"] * i + ["Normal"] * (20 - i)} for i in range(11)]
    test.append({"volume_id": "n", "label": "Normal", "bscan_labels": ["Normal"] * 20})
    rep = CvReport("fddl", 0.04, [0], [FoldResult(0, 0, 0, test)])
    thresholds = parse_thresholds("0:0.6:0.05")
    pairs = threshold_sweep(rep, thresholds)
    for t, n in pairs:
        direct = sum(recount(x["bscan_labels"], t) == x["label"] for x in test)
        assert n == direct
    counts = [n for _, n in pairs]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    assert pairs[0][1] == 11  # threshold 0: any abnormal B-scan marks the volume
    assert pairs[-1][1] == 1  # above every fraction: everything Normal


def test_parse_thresholds():
    t = parse_thresholds("0:0.4:0.01")
    assert len(t) == 41 and t[0] == 0.0 and t[-1] == pytest.approx(0.4)
    assert parse_thresholds("0.02,0.04") == [0.02, 0.04]
