"""Command-line interface: ``octdl <command> ...``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dictlearn.classify import RULES, predict
from .dictlearn.structure import ALGORITHMS, TrainConfig
from .dictlearn.training import train
from .evaluation import (
    CvReport,
    accuracy_table,
    leave_three_out_cv,
    parse_thresholds,
    threshold_sweep,
)
from .exceptions import NumericalError, OctDLError, StageError, ValidationError
from .features import HogSpec, PyramidSpec, extract_features
from .io.formats import FeatureSet, read_features, read_model, write_features, write_model
from .io.images import list_bscans, read_image, write_image
from .io.manifest import load_manifest
from .pipeline import (
    STAGES,
    PipelineConfig,
    _rescale,
    run_pipeline,
    volume_files,
    volumes_from_features,
)
from .preprocess import preprocess_bscan

log = logging.getLogger("octdl")


def _add_train_flags(p):
    d = TrainConfig()
    p.add_argument("--algo", choices=ALGORITHMS, default="fddl")
    p.add_argument("--lambda1", type=float, default=d.lambda1)
    p.add_argument("--lambda2", type=float, default=d.lambda2)
    p.add_argument("--eta", type=float, default=d.eta)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--w", type=float, default=d.w)
    p.add_argument("--atoms", type=int, default=d.n_atoms, help="atoms per class")
    p.add_argument("--shared-atoms", type=int, default=d.n_shared)
    p.add_argument("--iters", type=int, default=d.outer_iters)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--seed", type=int, default=d.seed)


def _train_config(args):
    return TrainConfig(lambda1=args.lambda1, lambda2=args.lambda2, eta=args.eta,
                       gamma=args.gamma, w=args.w, n_atoms=args.atoms,
                       n_shared=args.shared_atoms, outer_iters=args.iters, tol=args.tol,
                       seed=args.seed)


def _add_preprocess_flags(p):
    p.add_argument("--degree", type=int, default=2, choices=(1, 2, 3, 4))
    p.add_argument("--method", choices=("hull", "fraction"), default="hull")
    p.add_argument("--fraction", type=float, default=0.3)
    p.add_argument("--denoise-components", type=int, default=3,
                   help="mixture components for contrast enhancement; 0 disables it")
    p.add_argument("--em-iters", type=int, default=100)


def _add_feature_flags(p):
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--bins", type=int, default=9)


def _pipeline_config(args):
    k = args.denoise_components
    return PipelineConfig(
        degree=args.degree, method=args.method, fraction=args.fraction,
        n_components=max(k, 1), em_iters=args.em_iters, denoise=k > 0,
        levels=args.levels, bins=args.bins, algorithm=args.algo,
        rule=getattr(args, "rule", None), repetitions=getattr(args, "reps", 1),
        threshold=getattr(args, "threshold", 0.04),
        training_frames=getattr(args, "frames", 10), train=_train_config(args))


def cmd_preprocess(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    k = args.denoise_components
    for idx, path in volume_files(Path(args.inp).name, args.inp):
        try:
            crop = preprocess_bscan(read_image(path), degree=args.degree, method=args.method,
                                    fraction=args.fraction, n_components=max(k, 1),
                                    em_iters=args.em_iters, denoise=k > 0)
        except OctDLError as exc:
            raise StageError("preprocess", f"{path.name} (B-scan {idx})", exc) from exc
        write_image(out / f"{path.stem}.png", _rescale(crop), bits=16)
    return 0


def _feature_groups(root, manifest):
    root = Path(root)
    if manifest is not None:
        return [(r.volume_id, r.label, root / r.volume_id) for r in load_manifest(manifest)]
    subdirs = sorted(p for p in root.iterdir() if p.is_dir())
    if subdirs:
        return [(p.name, "-", p) for p in subdirs]
    return [(root.name, "-", root)]


def cmd_features(args):
    pspec, hspec = PyramidSpec(levels=args.levels), HogSpec(bins=args.bins)
    rows, vids, idxs, labels = [], [], [], []
    for vid, label, directory in _feature_groups(args.inp, args.manifest):
        for idx, path in volume_files(vid, directory):
            try:
                rows.append(extract_features(read_image(path), pspec, hspec))
            except OctDLError as exc:
                raise StageError("features", f"volume {vid} B-scan {idx}", exc) from exc
            vids.append(vid)
            idxs.append(idx)
            labels.append(label)
    write_features(args.out, FeatureSet(np.vstack(rows), vids, idxs, labels))
    return 0


def cmd_train(args):
    fs = read_features(args.features)
    model = train(args.algo, fs.X.T, np.asarray(fs.labels), _train_config(args))
    write_model(args.out, model)
    print(f"{args.algo}: {len(model.objective_trace)} iterations, "
          f"final objective {model.objective_trace[-1]:.6g}")
    return 0


def cmd_classify(args):
    model = read_model(args.model)
    fs = read_features(args.features)
    idx, scores = predict(model, fs.X.T, args.rule)
    preds = [{"volume_id": v, "bscan_index": i, "label": lab,
              "predicted": str(model.labels[k]), "scores": s.tolist()}
             for v, i, lab, k, s in zip(fs.volume_ids, fs.bscan_indices, fs.labels, idx, scores)]
    out = {"algorithm": model.algorithm, "rule": args.rule, "classes": list(map(str, model.labels)),
           "predictions": preds}
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n")
    return 0


def _volumes(args):
    manifest = load_manifest(args.data) if args.data else None
    if args.features:
        return volumes_from_features(read_features(args.features), manifest)
    if manifest is None:
        raise ValidationError("need --data (manifest) or --features")
    work = Path(args.work or Path(args.out).with_suffix(".work"))
    cfg = _pipeline_config(args)
    run_pipeline(manifest, work, stages=("preprocess", "features"), config=cfg)
    return volumes_from_features(read_features(work / "features.bin"), manifest)


def cmd_crossval(args):
    vols = _volumes(args)
    report = leave_three_out_cv(vols, args.algo, _train_config(args), repetitions=args.reps,
                                threshold=args.threshold, rule=args.rule, k=args.frames)
    Path(args.out).write_text(report.to_json(indent=2) + "\n")
    print(accuracy_table(report))
    return 0


def cmd_sweep(args):
    thresholds = parse_thresholds(args.thresholds)
    if args.report:
        report = CvReport.from_dict(json.loads(Path(args.report).read_text()))
    else:
        vols = _volumes(args)
        report = leave_three_out_cv(vols, args.algo, _train_config(args), repetitions=args.reps,
                                    rule=args.rule, k=args.frames)
    pairs = threshold_sweep(report, thresholds)
    for t, n in pairs:
        print(f"{t:.2f}\t{n:g}")
    if args.out:
        Path(args.out).write_text(json.dumps(
            [{"threshold": t, "correct": n} for t, n in pairs], indent=2) + "\n")
    return 0


def cmd_run(args):
    produced = run_pipeline(args.manifest, args.out, stages=tuple(args.stages.split(",")),
                            config=_pipeline_config(args))
    for name, path in produced.items():
        print(f"{name}\t{path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="octdl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="enhance, flatten and crop a directory of B-scans")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _add_preprocess_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("features", help="pyramid HOG features of cropped B-scans")
    p.add_argument("--in", dest="inp", required=True,
                   help="crop directory, or a root holding one sub-directory per volume")
    p.add_argument("--manifest", help="manifest giving volume ids and classes")
    p.add_argument("--out", required=True)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train a dictionary model on a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="label every row of a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--rule", choices=RULES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_classify)

    for name, fn, help_ in (("crossval", cmd_crossval, "leave-three-out cross-validation"),
                            ("sweep", cmd_sweep, "correct volumes per labelling threshold")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--data", help="manifest TSV")
        p.add_argument("--features", help="precomputed feature file (skips image stages)")
        p.add_argument("--work", help="scratch directory for computed features")
        p.add_argument("--reps", type=int, default=1)
        p.add_argument("--rule", choices=RULES)
        p.add_argument("--frames", type=int, default=10, help="training B-scans per volume")
        _add_train_flags(p)
        _add_preprocess_flags(p)
        _add_feature_flags(p)
        if name == "crossval":
            p.add_argument("--threshold", type=float, default=0.04)
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--thresholds", default="0:0.4:0.01")
            p.add_argument("--report", help="reuse predictions cached in a crossval report")
            p.add_argument("--out")
        p.set_defaults(func=fn)

    p = sub.add_parser("run", help="run pipeline stages from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stages", default=",".join(STAGES))
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--threshold", type=float, default=0.04)
    p.add_argument("--rule", choices=RULES)
    p.add_argument("--frames", type=int, default=10)
    _add_train_flags(p)
    _add_preprocess_flags(p)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (2, 3) else 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
