"""Little-endian length-prefixed binary primitives shared by file formats."""

from __future__ import annotations

import struct
from io import BufferedIOBase

import numpy as np

from .errors import CorruptFile


def write_str(fh, text: str) -> None:
    data = text.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def write_array(fh, arr: np.ndarray) -> None:
    data = np.ascontiguousarray(arr).tobytes()
    fh.write(struct.pack("<Q", len(data)))
    fh.write(data)


def read_exact(fh: BufferedIOBase, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptFile(f"unexpected end of file (wanted {n} bytes, got {len(data)})")
    return data


def read_struct(fh, fmt: str) -> tuple:
    return struct.unpack(fmt, read_exact(fh, struct.calcsize(fmt)))


def read_str(fh) -> str:
    (n,) = read_struct(fh, "<I")
    if n > 1 << 24:
        raise CorruptFile("implausible string length")
    return read_exact(fh, n).decode("utf-8")


def read_array(fh, dtype, count: int | None = None) -> np.ndarray:
    (nbytes,) = read_struct(fh, "<Q")
    arr = np.frombuffer(read_exact(fh, nbytes), dtype=dtype).copy()
    if count is not None and len(arr) != count:
        raise CorruptFile(f"array length {len(arr)} != expected {count}")
    return arr
