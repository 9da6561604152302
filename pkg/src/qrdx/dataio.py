"""File formats: delimited and binary sample matrices, and model blobs.

Binary matrix layout (all little-endian):
    magic b"QRDX" | u64 rows | u64 cols | rows*cols f64 row-major | rows u8 labels

Model blob layout:
    magic b"QRDM" | u8 tag length | tag ascii | u32 entry count,
    then per entry: u8 name length | name ascii | u8 ndim | ndim u64 dims | f64 payload
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .data import FeatureMatrix, generic_names
from .errors import FormatError, IoError
from .events import FEATURE_NAMES, N_FEATURES

MATRIX_MAGIC = b"QRDX"
BLOB_MAGIC = b"QRDM"


def _default_names(n_cols: int) -> tuple[str, ...]:
    return FEATURE_NAMES if n_cols == N_FEATURES else generic_names(n_cols)


def save_matrix(data: FeatureMatrix, path) -> None:
    """Write a matrix as CSV (``.csv`` suffix) or the binary format otherwise."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            _save_csv(data, path)
        else:
            _save_binary(data, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_matrix(path) -> FeatureMatrix:
    """Read a matrix saved by save_matrix, dispatching on the suffix."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    try:
        if path.suffix.lower() == ".csv":
            return _load_csv(path)
        return _load_binary(path)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _save_csv(data: FeatureMatrix, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + ["label"])
        for row, label in zip(data.values, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def _load_csv(path: Path) -> FeatureMatrix:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1] != "label":
            raise FormatError(f"{path}: header must end with a 'label' column")
        width = len(header) - 1
        values, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise FormatError(f"{path}:{lineno}: expected {width + 1} fields, got {len(row)}")
            try:
                values.append([float(v) for v in row[:-1]])
                labels.append(int(row[-1]))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric field ({exc})") from None
    if not values:
        raise FormatError(f"{path}: no data rows")
    return FeatureMatrix(np.array(values), np.array(labels), tuple(header[:-1]))


def _save_binary(data: FeatureMatrix, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(MATRIX_MAGIC)
        fh.write(struct.pack("<QQ", data.n_samples, data.n_features))
        fh.write(np.ascontiguousarray(data.values, dtype="<f8").tobytes())
        fh.write(data.labels.astype(np.uint8).tobytes())


def _load_binary(path: Path) -> FeatureMatrix:
    raw = path.read_bytes()
    if len(raw) < 20 or raw[:4] != MATRIX_MAGIC:
        raise FormatError(f"{path}: not a matrix file (bad magic or truncated header)")
    rows, cols = struct.unpack_from("<QQ", raw, 4)
    need = 20 + rows * cols * 8 + rows
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes for {rows}x{cols}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=20)
    labels = np.frombuffer(raw, dtype=np.uint8, count=rows, offset=20 + rows * cols * 8)
    return FeatureMatrix(values.reshape(rows, cols).copy(), labels.copy(), _default_names(cols))


def write_blob(path, tag: str, arrays: dict) -> None:
    """Serialise named float arrays under a short method tag."""
    tag_b = tag.encode("ascii")
    if not 1 <= len(tag_b) <= 255:
        raise FormatError("tag must be 1..255 ascii bytes")
    try:
        with open(path, "wb") as fh:
            fh.write(BLOB_MAGIC)
            fh.write(struct.pack("<B", len(tag_b)))
            fh.write(tag_b)
            fh.write(struct.pack("<I", len(arrays)))
            for name, arr in arrays.items():
                arr = np.asarray(arr, dtype="<f8")
                name_b = name.encode("ascii")
                fh.write(struct.pack("<B", len(name_b)))
                fh.write(name_b)
                fh.write(struct.pack("<B", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
                fh.write(np.ascontiguousarray(arr).tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_blob(path):
    """Inverse of write_blob; returns (tag, dict of arrays)."""
    path = Path(path)
    if not path.exists():
        raise IoError(f"no such file: {path}")
    raw = path.read_bytes()
    if len(raw) < 9 or raw[:4] != BLOB_MAGIC:
        raise FormatError(f"{path}: not a model blob")
    off = 4
    (tag_len,) = struct.unpack_from("<B", raw, off)
    off += 1
    tag = raw[off : off + tag_len].decode("ascii")
    off += tag_len
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    arrays = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<B", raw, off)
            off += 1
            name = raw[off : off + name_len].decode("ascii")
            off += name_len
            (ndim,) = struct.unpack_from("<B", raw, off)
            off += 1
            shape = struct.unpack_from(f"<{ndim}Q", raw, off) if ndim else ()
            off += 8 * ndim
            size = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=size, offset=off)
            off += size * 8
            arrays[name] = arr.reshape(shape).copy() if shape else float(arr[0])
    except (struct.error, ValueError) as exc:
        raise FormatError(f"{path}: truncated or corrupt blob ({exc})") from None
    return tag, arrays
