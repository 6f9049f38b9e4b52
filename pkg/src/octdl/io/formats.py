"""Binary feature (``DLF1``) and model (``DLM1``) files.

Feature file::

    b"DLF1" | u32 count | u32 dim | count*dim float64 (row-major)
    b"META" | count UTF-8 lines "volume_id<TAB>bscan_index<TAB>label\\n"

Model file (all integers u32, all reals float64, little-endian)::

    b"DLM1"
    u32 len + ASCII algorithm tag
    C | n | K_1 .. K_C | K_0
    u32 H | H hyperparameters in HYPERPARAMETER_ORDER
    C x (u32 len + UTF-8 class label)
    D_1 .. D_C, D_0            column-major n x K_c arrays
    m_1 .. m_C                 class mean codes (length sum K_c each)
    m_0                        shared mean code (length K_0)
    u32 T | T objective values
"""
import io as _io
import struct
from dataclasses import dataclass

import numpy as np

from ..dictlearn.structure import ClassStats, StructuredDictionary, TrainConfig, TrainedModel
from ..exceptions import FormatError, ShapeMismatchError

FEATURE_MAGIC = b"DLF1"
META_SENTINEL = b"META"
MODEL_MAGIC = b"DLM1"

HYPERPARAMETER_ORDER = ("lambda1", "lambda2", "eta", "gamma", "w", "outer_iters", "tol",
                        "seed", "n_atoms", "n_shared", "code_iters", "dict_iters")
_INT_FIELDS = {"outer_iters", "seed", "n_atoms", "n_shared", "code_iters", "dict_iters"}


@dataclass
class FeatureSet:
    X: np.ndarray
    volume_ids: list
    bscan_indices: list
    labels: list

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ShapeMismatchError("feature matrix must be 2-D (samples x dim)")
        n = self.X.shape[0]
        if not (len(self.volume_ids) == len(self.bscan_indices) == len(self.labels) == n):
            raise ShapeMismatchError("metadata must have one entry per feature row")

    def __len__(self):
        return self.X.shape[0]


def features_to_bytes(fs):
    buf = _io.BytesIO()
    count, dim = fs.X.shape
    buf.write(FEATURE_MAGIC)
    buf.write(struct.pack("<II", count, dim))
    buf.write(np.ascontiguousarray(fs.X, dtype="<f8").tobytes())
    buf.write(META_SENTINEL)
    for vid, idx, lab in zip(fs.volume_ids, fs.bscan_indices, fs.labels):
        for field in (str(vid), str(lab)):
            if "\t" in field or "\n" in field:
                raise FormatError(f"metadata field {field!r} contains a tab or newline")
        buf.write(f"{vid}\t{int(idx)}\t{lab}\n".encode("utf-8"))
    return buf.getvalue()


def features_from_bytes(data):
    if data[:4] != FEATURE_MAGIC:
        raise FormatError("not a DLF1 feature file")
    count, dim = struct.unpack_from("<II", data, 4)
    start = 12
    end = start + 8 * count * dim
    if len(data) < end + 4 or data[end:end + 4] != META_SENTINEL:
        raise FormatError("feature file truncated or missing META section")
    X = np.frombuffer(data, dtype="<f8", count=count * dim, offset=start).reshape(count, dim)
    lines = data[end + 4:].decode("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != count:
        raise FormatError(f"expected {count} metadata lines, found {len(lines)}")
    vids, idxs, labs = [], [], []
    for line in lines:
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"malformed metadata line {line!r}")
        vids.append(parts[0])
        idxs.append(int(parts[1]))
        labs.append(parts[2])
    return FeatureSet(X.astype(np.float64), vids, idxs, labs)


def write_features(path, fs):
    with open(path, "wb") as fh:
        fh.write(features_to_bytes(fs))


def read_features(path):
    with open(path, "rb") as fh:
        return features_from_bytes(fh.read())


def _put_str(buf, s, encoding):
    raw = s.encode(encoding)
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)


def _put_f64(buf, arr):
    buf.write(np.asarray(arr, dtype="<f8").ravel(order="F").tobytes())


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("model file truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, k=1):
        vals = struct.unpack(f"<{k}I", self.take(4 * k))
        return vals if k > 1 else vals[0]

    def string(self, encoding):
        return self.take(self.u32()).decode(encoding)

    def f64(self, count, shape=None):
        arr = np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)
        return arr.reshape(shape, order="F") if shape is not None else arr


def model_to_bytes(model):
    D = model.dictionary
    cfg = model.config
    buf = _io.BytesIO()
    buf.write(MODEL_MAGIC)
    _put_str(buf, model.algorithm, "ascii")
    buf.write(struct.pack("<II", D.n_classes, D.n_features))
    buf.write(struct.pack(f"<{D.n_classes}I", *D.atom_counts))
    buf.write(struct.pack("<I", D.n_shared))
    buf.write(struct.pack("<I", len(HYPERPARAMETER_ORDER)))
    _put_f64(buf, [float(getattr(cfg, name)) for name in HYPERPARAMETER_ORDER])
    for label in D.labels:
        _put_str(buf, str(label), "utf-8")
    for Dc in D.class_dicts:
        _put_f64(buf, Dc)
    _put_f64(buf, D.shared)
    _put_f64(buf, model.stats.class_means)
    _put_f64(buf, model.stats.shared_mean)
    buf.write(struct.pack("<I", len(model.objective_trace)))
    _put_f64(buf, model.objective_trace)
    return buf.getvalue()


def model_from_bytes(data):
    r = _Reader(data)
    if r.take(4) != MODEL_MAGIC:
        raise FormatError("not a DLM1 model file")
    algorithm = r.string("ascii")
    C, n = r.u32(2)
    counts = list(r.u32(C)) if C > 1 else [r.u32()]
    K0 = r.u32()
    H = r.u32()
    values = r.f64(H)
    params = {}
    for name, v in zip(HYPERPARAMETER_ORDER, values):
        params[name] = int(v) if name in _INT_FIELDS else float(v)
    labels = [r.string("utf-8") for _ in range(C)]
    dicts = [r.f64(n * k, (n, k)) for k in counts]
    shared = r.f64(n * K0, (n, K0))
    K = sum(counts)
    class_means = r.f64(C * K, (C, K))
    shared_mean = r.f64(K0)
    T = r.u32()
    trace = r.f64(T).tolist()
    if r.pos != len(data):
        raise FormatError("trailing bytes after model payload")
    return TrainedModel(
        dictionary=StructuredDictionary(dicts, shared, labels),
        stats=ClassStats(class_means=class_means, shared_mean=shared_mean),
        config=TrainConfig(**params), algorithm=algorithm, objective_trace=trace)


def write_model(path, model):
    with open(path, "wb") as fh:
        fh.write(model_to_bytes(model))


def read_model(path):
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())
