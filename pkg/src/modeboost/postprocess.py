"""Joint feature normalization and categorical encoding.

One scaler is fitted per feature over the pooled training rows of all
entities, so cross-entity magnitude relations survive scaling.  Integer-coded
categorical columns (entity code, calendar fields) pass through unchanged.
Values outside the training range extrapolate linearly rather than clipping,
keeping the map strictly monotone.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ._binio import read_array, read_str, read_struct, write_array, write_str
from .errors import AlreadyScaled, DuplicateName, EmptyTraining, FeatureMismatch
from .features import CATEGORICAL_FEATURES, FeatureMatrix

_MODES = ("minmax", "zscore")


@dataclass(frozen=True)
class Scaler:
    """Fitted per-feature affine map ``(x - shift) / span`` (span 1 for constants)."""

    mode: str
    feature_names: tuple[str, ...]
    shift: np.ndarray
    span: np.ndarray
    passthrough: np.ndarray  # bool per feature

    def transform_array(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != len(self.feature_names):
            raise FeatureMismatch(
                f"array has {x.shape[1]} columns, scaler expects {len(self.feature_names)}"
            )
        out = (x - self.shift) / self.span
        out[:, self.passthrough] = x[:, self.passthrough]
        return out

    def inverse_transform_array(self, x: np.ndarray) -> np.ndarray:
        out = x * self.span + self.shift
        out[:, self.passthrough] = x[:, self.passthrough]
        return out

    def to_bytes(self) -> bytes:
        import io

        buf = io.BytesIO()
        write_str(buf, self.mode)
        buf.write(struct.pack("<I", len(self.feature_names)))
        for name in self.feature_names:
            write_str(buf, name)
        write_array(buf, self.shift)
        write_array(buf, self.span)
        write_array(buf, self.passthrough.astype(np.uint8))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Scaler":
        import io

        buf = io.BytesIO(data)
        mode = read_str(buf)
        (n,) = read_struct(buf, "<I")
        names = tuple(read_str(buf) for _ in range(n))
        shift = read_array(buf, np.float64, n)
        span = read_array(buf, np.float64, n)
        passthrough = read_array(buf, np.uint8, n).astype(bool)
        return cls(mode, names, shift, span, passthrough)


def fit_scaler(matrix: FeatureMatrix, mode: str = "minmax") -> Scaler:
    """Fit pooled per-feature statistics on the training partition only."""
    if mode not in _MODES:
        raise ValueError(f"unknown scaler mode {mode!r}")
    if matrix.scaled:
        raise AlreadyScaled("refusing to fit a scaler on an already-scaled matrix")
    train = matrix.X[matrix.rows_train()]
    if train.shape[0] == 0:
        raise EmptyTraining("no training rows to fit the scaler on")
    if mode == "minmax":
        lo = train.min(axis=0)
        hi = train.max(axis=0)
        shift, span = lo, hi - lo
    else:
        shift = train.mean(axis=0)
        span = train.std(axis=0, ddof=0)
    constant = span == 0
    span = np.where(constant, 1.0, span)
    # Constant features map to exactly 0 either way.
    passthrough = np.array([name in CATEGORICAL_FEATURES for name in matrix.feature_names])
    return Scaler(
        mode=mode,
        feature_names=tuple(matrix.feature_names),
        shift=shift.astype(np.float64),
        span=span.astype(np.float64),
        passthrough=passthrough,
    )


def transform(matrix: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    """Return a scaled copy of the matrix; refuses to scale twice."""
    if matrix.scaled:
        raise AlreadyScaled("matrix is already scaled")
    if tuple(matrix.feature_names) != scaler.feature_names:
        raise FeatureMismatch("matrix features do not match the fitted scaler")
    return matrix.with_x(scaler.transform_array(matrix.X), scaled=True)


def encode_entities(names) -> dict[str, int]:
    """Deterministic dense codes assigned by sorted name order."""
    ordered = sorted(names)
    if len(set(ordered)) != len(ordered):
        dupes = sorted({n for n in ordered if ordered.count(n) > 1})
        raise DuplicateName(f"duplicate entity name(s): {', '.join(dupes)}")
    return {name: code for code, name in enumerate(ordered)}
