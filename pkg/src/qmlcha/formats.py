"""On-disk formats: QSDS datasets, QHUL hulls, and JSON tree models.

QSDS: magic "QSDS", u32 version=1, u16 d_A, u16 d_B, u8 flags
(bit0 has_alpha, bit1 has_label), u64 count, then per record
feature_dim float64 LE, optional float64 alpha, optional int8 label.

QHUL: magic "QHUL", u32 version=1, u16 d_A, u16 d_B, u64 m,
u8 include_origin, then m * feature_dim float64 LE row-major.

Models are JSON documents carrying dims, committee size, tree parameters,
nested tree nodes, and (for hull-bound models) the SHA-256 of the hull
file the alpha features came from.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .cha import ConvexHull
from .ensemble import BaggedCommittee, BchaModel, DecisionTree, TreeParams
from .errors import FormatError
from .qstate import Dims
from .sampling import LabeledDataset, LabelSource

_QSDS_MAGIC = b"QSDS"
_QHUL_MAGIC = b"QHUL"
_VERSION = 1

_QSDS_HEAD = struct.Struct("<4sIHHBQ")
_QHUL_HEAD = struct.Struct("<4sIHHQB")

PathLike = Union[str, Path]


def _record_dtype(feature_dim: int, has_alpha: bool, has_label: bool) -> np.dtype:
    fields = [("coords", "<f8", (feature_dim,))]
    if has_alpha:
        fields.append(("alpha", "<f8"))
    if has_label:
        fields.append(("label", "<i1"))
    return np.dtype(fields)


def write_qsds_arrays(
    path: PathLike,
    dims: Dims,
    coords: np.ndarray,
    alpha: Optional[np.ndarray] = None,
    labels: Optional[np.ndarray] = None,
) -> None:
    """Write a QSDS file from raw arrays (alpha and labels each optional)."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != dims.feature_dim:
        raise FormatError(f"coords must be (n, {dims.feature_dim}), got {coords.shape}")
    count = coords.shape[0]
    flags = (1 if alpha is not None else 0) | (2 if labels is not None else 0)
    rec = np.empty(count, dtype=_record_dtype(dims.feature_dim, alpha is not None,
                                              labels is not None))
    rec["coords"] = coords
    if alpha is not None:
        rec["alpha"] = np.asarray(alpha, dtype=float)
    if labels is not None:
        rec["label"] = np.asarray(labels, dtype=np.int8)
    head = _QSDS_HEAD.pack(_QSDS_MAGIC, _VERSION, dims.d_a, dims.d_b, flags, count)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(rec.tobytes())


def write_qsds(path: PathLike, ds: LabeledDataset) -> None:
    write_qsds_arrays(path, ds.dims, ds.coords, ds.alpha, ds.labels)


def read_qsds_arrays(
    path: PathLike,
) -> Tuple[Dims, np.ndarray, Optional[np.ndarray], Optional[np.ndarray]]:
    """Read a QSDS file into (dims, coords, alpha | None, labels | None)."""
    raw = Path(path).read_bytes()
    if len(raw) < _QSDS_HEAD.size:
        raise FormatError(f"{path}: truncated QSDS header")
    magic, version, d_a, d_b, flags, count = _QSDS_HEAD.unpack_from(raw)
    if magic != _QSDS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported QSDS version {version}")
    if flags & ~3:
        raise FormatError(f"{path}: unknown flag bits {flags:#x}")
    has_alpha = bool(flags & 1)
    has_label = bool(flags & 2)
    dims = Dims(d_a, d_b)
    dtype = _record_dtype(dims.feature_dim, has_alpha, has_label)
    expected = _QSDS_HEAD.size + count * dtype.itemsize
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    rec = np.frombuffer(raw, dtype=dtype, offset=_QSDS_HEAD.size)
    coords = rec["coords"].astype(float).reshape(count, dims.feature_dim)
    alpha = rec["alpha"].astype(float) if has_alpha else None
    labels = rec["label"].astype(np.int8) if has_label else None
    return dims, coords, alpha, labels


def read_qsds(path: PathLike, label_source: LabelSource = LabelSource.PPT) -> LabeledDataset:
    """Read a labeled QSDS file (the format itself does not record the source)."""
    dims, coords, alpha, labels = read_qsds_arrays(path)
    if labels is None:
        raise FormatError(f"{path}: file has no labels")
    return LabeledDataset(dims, coords, labels, alpha, label_source)


def write_qhul(path: PathLike, hull: ConvexHull) -> None:
    head = _QHUL_HEAD.pack(
        _QHUL_MAGIC, _VERSION, hull.dims.d_a, hull.dims.d_b, hull.m,
        1 if hull.include_origin else 0,
    )
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(hull.points, dtype="<f8").tobytes())


def read_qhul(path: PathLike) -> ConvexHull:
    raw = Path(path).read_bytes()
    if len(raw) < _QHUL_HEAD.size:
        raise FormatError(f"{path}: truncated QHUL header")
    magic, version, d_a, d_b, m, origin = _QHUL_HEAD.unpack_from(raw)
    if magic != _QHUL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported QHUL version {version}")
    dims = Dims(d_a, d_b)
    expected = _QHUL_HEAD.size + m * dims.feature_dim * 8
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(raw)}")
    points = np.frombuffer(raw, dtype="<f8", offset=_QHUL_HEAD.size).reshape(
        m, dims.feature_dim
    )
    return ConvexHull(dims, points.copy(), bool(origin))


def sha256_file(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def committee_to_json(
    committee: BaggedCommittee,
    dims: Dims,
    params: TreeParams,
    hull_sha256: Optional[str] = None,
) -> dict:
    return {
        "format": "qmlcha-model",
        "version": _VERSION,
        "dims": {"d_a": dims.d_a, "d_b": dims.d_b},
        "L": committee.l_size,
        "input_dim": committee.input_dim,
        "params": {"max_depth": params.max_depth, "min_leaf": params.min_leaf,
                   "split_criterion": params.split_criterion},
        "hull_sha256": hull_sha256,
        "trees": [t.to_dict() for t in committee.trees],
    }


def save_model(
    path: PathLike,
    model: Union[BchaModel, BaggedCommittee],
    dims: Dims,
    params: TreeParams,
    hull_sha256: Optional[str] = None,
) -> None:
    committee = model.committee if isinstance(model, BchaModel) else model
    doc = committee_to_json(committee, dims, params, hull_sha256)
    Path(path).write_text(json.dumps(doc))


def load_model(path: PathLike, hull: Optional[ConvexHull] = None,
               hull_path: Optional[PathLike] = None):
    """Load a committee; binding a hull (object or file) returns a BchaModel.

    When both the model's recorded hull hash and a hull file are given, the
    hashes must agree.
    """
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "qmlcha-model":
        raise FormatError(f"{path}: not a qmlcha model file")
    dims = Dims(doc["dims"]["d_a"], doc["dims"]["d_b"])
    input_dim = int(doc["input_dim"])
    trees = [DecisionTree.from_dict(t, input_dim) for t in doc["trees"]]
    committee = BaggedCommittee(trees, input_dim)
    if hull_path is not None:
        recorded = doc.get("hull_sha256")
        actual = sha256_file(hull_path)
        if recorded is not None and recorded != actual:
            raise FormatError(
                f"{path}: hull hash mismatch (model trained against a different hull)"
            )
        hull = read_qhul(hull_path)
    if hull is None:
        return committee
    if input_dim != dims.feature_dim + 1:
        raise FormatError(f"{path}: committee is not hull-extended (input_dim={input_dim})")
    return BchaModel(committee, hull)
