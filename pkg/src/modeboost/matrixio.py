"""Feature-matrix persistence: compact binary (magic ``MBFM1``) and CSV export.

The binary format is the pipeline interchange format: it round-trips the
matrix exactly, including split indices, entity names, peaks, and targets.
The CSV export (one header row: step, features, then per-horizon targets) is
for inspection with external tools and is write-only.
"""

from __future__ import annotations

import csv
import struct
from datetime import datetime
from pathlib import Path

import numpy as np

from ._binio import read_array, read_str, read_struct, write_array, write_str
from .core import SplitIndices
from .errors import CorruptFile, VersionMismatch
from .features import FeatureMatrix

MATRIX_MAGIC = b"MBFM1"
MATRIX_VERSION = 1


def save_matrix(matrix: FeatureMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<H", MATRIX_VERSION))
        fh.write(struct.pack("<B", int(matrix.scaled)))
        fh.write(
            struct.pack(
                "<IIII",
                matrix.n_rows,
                len(matrix.feature_names),
                len(matrix.horizons),
                len(matrix.entity_names),
            )
        )
        fh.write(
            struct.pack(
                "<QQQ", matrix.split.train_end, matrix.split.valid_end, matrix.split.length
            )
        )
        write_str(fh, matrix.grid_start.strftime("%Y-%m-%dT%H:%M"))
        fh.write(struct.pack("<d", matrix.label_tolerance))
        write_str(fh, matrix.config_hash)
        for name in matrix.feature_names:
            write_str(fh, name)
        for name in matrix.entity_names:
            write_str(fh, name)
        for h in matrix.horizons:
            fh.write(struct.pack("<I", h))
        write_array(fh, matrix.peaks.astype(np.float64))
        write_array(fh, matrix.steps.astype(np.int64))
        write_array(fh, matrix.X.astype(np.float64))
        for h in matrix.horizons:
            write_array(fh, matrix.y_reg[h].astype(np.float64))
            write_array(fh, matrix.y_cls[h].astype(np.int8))


def load_matrix(path: str | Path) -> FeatureMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise CorruptFile(f"not a matrix file (magic {magic!r})")
        (version,) = read_struct(fh, "<H")
        if version != MATRIX_VERSION:
            raise VersionMismatch(f"matrix format version {version} unsupported")
        (scaled,) = read_struct(fh, "<B")
        n_rows, n_features, n_horizons, n_entities = read_struct(fh, "<IIII")
        train_end, valid_end, length = read_struct(fh, "<QQQ")
        grid_start = datetime.strptime(read_str(fh), "%Y-%m-%dT%H:%M")
        (tolerance,) = read_struct(fh, "<d")
        config_hash = read_str(fh)
        feature_names = [read_str(fh) for _ in range(n_features)]
        entity_names = [read_str(fh) for _ in range(n_entities)]
        horizons = tuple(read_struct(fh, "<I")[0] for _ in range(n_horizons))
        peaks = read_array(fh, np.float64, n_entities)
        steps = read_array(fh, np.int64, n_rows)
        x = read_array(fh, np.float64, n_rows * n_features).reshape(n_rows, n_features)
        y_reg = {}
        y_cls = {}
        for h in horizons:
            y_reg[h] = read_array(fh, np.float64, n_rows)
            y_cls[h] = read_array(fh, np.int8, n_rows)
        if fh.read(1):
            raise CorruptFile("trailing bytes after matrix payload")
    return FeatureMatrix(
        feature_names=feature_names,
        X=x,
        steps=steps,
        entity_names=entity_names,
        horizons=horizons,
        y_reg=y_reg,
        y_cls=y_cls,
        split=SplitIndices(int(train_end), int(valid_end), int(length)),
        grid_start=grid_start,
        label_tolerance=float(tolerance),
        peaks=peaks,
        scaled=bool(scaled),
        config_hash=config_hash,
    )


def write_matrix_csv(matrix: FeatureMatrix, path: str | Path) -> None:
    header = ["step"] + list(matrix.feature_names)
    for h in matrix.horizons:
        header += [f"y_reg_{h}", f"y_cls_{h}"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(matrix.n_rows):
            row: list = [int(matrix.steps[i])]
            row += [repr(float(v)) for v in matrix.X[i]]
            for h in matrix.horizons:
                row.append(repr(float(matrix.y_reg[h][i])))
                row.append(int(matrix.y_cls[h][i]))
            writer.writerow(row)
