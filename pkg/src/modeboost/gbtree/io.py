"""Ensemble persistence: length-prefixed binary (magic ``MBGB1``) and JSON.

Both formats round-trip predictions exactly: the binary stores raw float64
bytes, the JSON uses Python's shortest round-trip float rendering.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .._binio import read_array, read_str, read_struct, write_array, write_str
from ..errors import CorruptFile, IoFailure, VersionMismatch
from ..postprocess import Scaler
from .booster import Ensemble
from .tree import Tree

MODEL_MAGIC = b"MBGB1"
MODEL_VERSION = 1

# Serialized bytes per tree node: feature i32, threshold f64, left i32,
# right i32, value f64, gain f64, missing u8.
NODE_BYTES = 4 + 8 + 4 + 4 + 8 + 8 + 1
TREE_OVERHEAD_BYTES = 64


def _write_binary(ensemble: Ensemble, fh) -> None:
    fh.write(MODEL_MAGIC)
    fh.write(struct.pack("<H", MODEL_VERSION))
    fh.write(struct.pack("<BH", 1 if ensemble.task == "classification" else 0, ensemble.num_classes))
    fh.write(struct.pack("<i", -1 if ensemble.horizon is None else ensemble.horizon))
    has_tol = ensemble.label_tolerance is not None
    fh.write(struct.pack("<Bd", int(has_tol), ensemble.label_tolerance if has_tol else 0.0))
    fh.write(struct.pack("<I", len(ensemble.base_score)))
    fh.write(np.asarray(ensemble.base_score, dtype=np.float64).tobytes())
    fh.write(struct.pack("<I", len(ensemble.feature_names)))
    for name in ensemble.feature_names:
        write_str(fh, name)
    if ensemble.scaler is not None:
        blob = ensemble.scaler.to_bytes()
        fh.write(struct.pack("<BQ", 1, len(blob)))
        fh.write(blob)
    else:
        fh.write(struct.pack("<BQ", 0, 0))
    peaks = ensemble.peaks or {}
    fh.write(struct.pack("<BI", int(bool(peaks)), len(peaks)))
    for name in sorted(peaks):
        write_str(fh, name)
        fh.write(struct.pack("<d", float(peaks[name])))
    write_str(fh, json.dumps(ensemble.params or {}, sort_keys=True))
    write_str(fh, ensemble.config_hash)
    fh.write(struct.pack("<i", -1 if ensemble.best_iteration is None else ensemble.best_iteration))
    fh.write(struct.pack("<I", len(ensemble.trees)))
    for tree in ensemble.trees:
        fh.write(struct.pack("<I", tree.n_nodes))
        write_array(fh, tree.feature.astype(np.int32))
        write_array(fh, tree.threshold.astype(np.float64))
        write_array(fh, tree.left.astype(np.int32))
        write_array(fh, tree.right.astype(np.int32))
        write_array(fh, tree.value.astype(np.float64))
        write_array(fh, tree.gain.astype(np.float64))
        write_array(fh, tree.missing_left.astype(np.uint8))


def _read_binary(fh) -> Ensemble:
    magic = fh.read(len(MODEL_MAGIC))
    if magic != MODEL_MAGIC:
        raise CorruptFile(f"not a model file (magic {magic!r})")
    (version,) = read_struct(fh, "<H")
    if version != MODEL_VERSION:
        raise VersionMismatch(f"model format version {version} unsupported")
    is_clf, num_classes = read_struct(fh, "<BH")
    (horizon,) = read_struct(fh, "<i")
    has_tol, tolerance = read_struct(fh, "<Bd")
    (n_base,) = read_struct(fh, "<I")
    base = np.frombuffer(fh.read(8 * n_base), dtype=np.float64).copy()
    if len(base) != n_base:
        raise CorruptFile("truncated base score block")
    (n_names,) = read_struct(fh, "<I")
    names = tuple(read_str(fh) for _ in range(n_names))
    has_scaler, blob_len = read_struct(fh, "<BQ")
    scaler = None
    if has_scaler:
        blob = fh.read(blob_len)
        if len(blob) != blob_len:
            raise CorruptFile("truncated scaler block")
        scaler = Scaler.from_bytes(blob)
    has_peaks, n_peaks = read_struct(fh, "<BI")
    peaks = None
    if has_peaks:
        peaks = {}
        for _ in range(n_peaks):
            name = read_str(fh)
            (peak,) = read_struct(fh, "<d")
            peaks[name] = peak
    params = json.loads(read_str(fh)) or None
    config_hash = read_str(fh)
    (best_iter,) = read_struct(fh, "<i")
    (n_trees,) = read_struct(fh, "<I")
    trees = []
    for _ in range(n_trees):
        (n_nodes,) = read_struct(fh, "<I")
        trees.append(
            Tree(
                feature=read_array(fh, np.int32, n_nodes),
                threshold=read_array(fh, np.float64, n_nodes),
                left=read_array(fh, np.int32, n_nodes),
                right=read_array(fh, np.int32, n_nodes),
                value=read_array(fh, np.float64, n_nodes),
                gain=read_array(fh, np.float64, n_nodes),
                missing_left=read_array(fh, np.uint8, n_nodes).astype(bool),
            )
        )
    if fh.read(1):
        raise CorruptFile("trailing bytes after model payload")
    return Ensemble(
        task="classification" if is_clf else "regression",
        num_classes=num_classes,
        base_score=base,
        trees=trees,
        feature_names=names,
        scaler=scaler,
        horizon=None if horizon < 0 else horizon,
        label_tolerance=tolerance if has_tol else None,
        peaks=peaks,
        params=params,
        config_hash=config_hash,
        best_iteration=None if best_iter < 0 else best_iter,
    )


def ensemble_to_json(ensemble: Ensemble) -> str:
    doc = {
        "format": "modeboost-ensemble",
        "version": MODEL_VERSION,
        "task": ensemble.task,
        "num_classes": ensemble.num_classes,
        "horizon": ensemble.horizon,
        "label_tolerance": ensemble.label_tolerance,
        "base_score": [float(b) for b in ensemble.base_score],
        "feature_names": list(ensemble.feature_names),
        "peaks": ensemble.peaks,
        "params": ensemble.params,
        "config_hash": ensemble.config_hash,
        "best_iteration": ensemble.best_iteration,
        "scaler": None,
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "value": tree.value.tolist(),
                "gain": tree.gain.tolist(),
                "missing_left": [int(m) for m in tree.missing_left],
            }
            for tree in ensemble.trees
        ],
    }
    if ensemble.scaler is not None:
        s = ensemble.scaler
        doc["scaler"] = {
            "mode": s.mode,
            "feature_names": list(s.feature_names),
            "shift": s.shift.tolist(),
            "span": s.span.tolist(),
            "passthrough": [int(p) for p in s.passthrough],
        }
    return json.dumps(doc)


def ensemble_from_json(text: str) -> Ensemble:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"invalid JSON model: {exc}") from exc
    if doc.get("format") != "modeboost-ensemble":
        raise CorruptFile("not a JSON model export")
    if doc.get("version") != MODEL_VERSION:
        raise VersionMismatch(f"model format version {doc.get('version')} unsupported")
    scaler = None
    if doc.get("scaler"):
        s = doc["scaler"]
        scaler = Scaler(
            mode=s["mode"],
            feature_names=tuple(s["feature_names"]),
            shift=np.asarray(s["shift"], dtype=np.float64),
            span=np.asarray(s["span"], dtype=np.float64),
            passthrough=np.asarray(s["passthrough"], dtype=bool),
        )
    trees = [
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            value=np.asarray(t["value"], dtype=np.float64),
            gain=np.asarray(t["gain"], dtype=np.float64),
            missing_left=np.asarray(t["missing_left"], dtype=bool),
        )
        for t in doc["trees"]
    ]
    return Ensemble(
        task=doc["task"],
        num_classes=doc["num_classes"],
        base_score=np.asarray(doc["base_score"], dtype=np.float64),
        trees=trees,
        feature_names=tuple(doc["feature_names"]),
        scaler=scaler,
        horizon=doc.get("horizon"),
        label_tolerance=doc.get("label_tolerance"),
        peaks=doc.get("peaks"),
        params=doc.get("params"),
        config_hash=doc.get("config_hash", ""),
        best_iteration=doc.get("best_iteration"),
    )


def save(ensemble: Ensemble, path: str | Path) -> None:
    """Write a model file; a ``.json`` suffix selects the JSON export."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            path.write_text(ensemble_to_json(ensemble), encoding="utf-8")
        else:
            with open(path, "wb") as fh:
                _write_binary(ensemble, fh)
    except OSError as exc:
        raise IoFailure(f"cannot write model to {path}: {exc}") from exc


def load(path: str | Path) -> Ensemble:
    path = Path(path)
    try:
        head = open(path, "rb").read(len(MODEL_MAGIC))
    except OSError as exc:
        raise IoFailure(f"cannot read model from {path}: {exc}") from exc
    if head == MODEL_MAGIC:
        with open(path, "rb") as fh:
            return _read_binary(fh)
    return ensemble_from_json(path.read_text(encoding="utf-8"))


def serialized_size(ensemble: Ensemble) -> int:
    """Exact byte size of the binary serialization."""
    import io as _io

    buf = _io.BytesIO()
    _write_binary(ensemble, buf)
    return buf.tell()


def estimated_resident_bytes(ensemble: Ensemble) -> int:
    """Analytic in-memory estimate from the documented node layout."""
    total = 256  # metadata, base scores
    total += sum(len(n) + 24 for n in ensemble.feature_names)
    if ensemble.scaler is not None:
        total += len(ensemble.scaler.to_bytes())
    for tree in ensemble.trees:
        total += tree.n_nodes * NODE_BYTES + TREE_OVERHEAD_BYTES
    return total
