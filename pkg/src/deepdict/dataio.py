"""Readers for IDX (MNIST) and amat (MNIST variations) datasets.

All readers return samples as *columns*: an ``(n_features, n_samples)``
float64 array, so that data is synthesized as ``X = D @ Z``.
"""

from __future__ import annotations

import gzip
import os
import struct
import warnings

import numpy as np

from deepdict.exceptions import DataFormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# tolerance for amat pixels that fall just outside [0, 1]
AMAT_RANGE_SLACK = 1e-9


def _read_bytes(path) -> bytes:
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _idx_header(buf: bytes, magic: int, ndim: int, path) -> tuple[int, ...]:
    if len(buf) < 4:
        raise DataFormatError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", buf[:4])
    if found != magic:
        raise DataFormatError(
            f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}"
        )
    if len(buf) < 4 + 4 * ndim:
        raise DataFormatError(f"{path}: length {len(buf)} bytes too short for an IDX header")
    dims = struct.unpack(">" + "I" * ndim, buf[4 : 4 + 4 * ndim])
    if dims[0] == 0:
        raise DataFormatError(f"{path}: IDX file declares zero items")
    expected = 4 + 4 * ndim + int(np.prod(dims))
    if len(buf) != expected:
        raise DataFormatError(
            f"{path}: length {len(buf)} bytes does not match declared "
            f"dimensions {dims} ({expected} bytes)"
        )
    return dims


def read_idx_images(path) -> np.ndarray:
    """Read an IDX3 image file.

    Returns a ``(height * width, n_images)`` array with pixels scaled to
    [0, 1]. Each column is one image flattened row-major.
    """
    buf = _read_bytes(path)
    count, rows, cols = _idx_header(buf, IDX_IMAGES_MAGIC, 3, path)
    pixels = np.frombuffer(buf, dtype=np.uint8, offset=16)
    X = pixels.reshape(count, rows * cols).T / 255.0
    return _frozen(np.ascontiguousarray(X))


def read_idx_labels(path) -> np.ndarray:
    """Read an IDX1 label file into an int64 vector."""
    buf = _read_bytes(path)
    _idx_header(buf, IDX_LABELS_MAGIC, 1, path)
    labels = np.frombuffer(buf, dtype=np.uint8, offset=8).astype(np.int64)
    return _frozen(labels)


def _scan_amat(path) -> None:
    # slow path, only used to produce a precise error message
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            tokens = line.split()
            if not tokens:
                continue
            for tok in tokens:
                try:
                    float(tok)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}: non-numeric token {tok!r}"
                    ) from None
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: ragged line with {len(tokens)} fields, "
                    f"expected {width}"
                )


def read_amat(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an amat text file: one sample per line, label in the last field.

    Returns ``(X, labels)`` with ``X`` of shape ``(n_fields - 1, n_lines)``.
    """
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)  # empty file
            data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        _scan_amat(path)
        raise DataFormatError(f"{path}: {exc}") from exc
    if data.size == 0:
        raise DataFormatError(f"{path}: no samples")
    if data.shape[1] < 2:
        raise DataFormatError(f"{path}: need at least one pixel and a label per line")
    if not np.all(np.isfinite(data)):
        raise DataFormatError(f"{path}: non-finite values")

    X = data[:, :-1].T
    lo, hi = X.min(), X.max()
    if lo < -AMAT_RANGE_SLACK or hi > 1.0 + AMAT_RANGE_SLACK:
        raise DataFormatError(f"{path}: pixel values outside [0, 1] ({lo}, {hi})")
    X = np.ascontiguousarray(np.clip(X, 0.0, 1.0))

    raw = data[:, -1]
    labels = np.rint(raw).astype(np.int64)
    if labels.min() < 0:
        raise DataFormatError(f"{path}: negative label")
    return _frozen(X), _frozen(labels)


def write_amat(X: np.ndarray, labels, path) -> None:
    """Write samples (columns of ``X``) and labels in amat text format."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or labels.shape != (X.shape[1],):
        raise DataFormatError(
            f"cannot write {X.shape} samples with {labels.shape} labels"
        )
    with open(path, "w") as f:
        for j in range(X.shape[1]):
            fields = [repr(float(v)) for v in X[:, j]]
            fields.append(str(int(labels[j])))
            f.write(" ".join(fields) + "\n")


def check_pairing(X: np.ndarray, labels: np.ndarray) -> None:
    if X.shape[1] != len(labels):
        raise DataFormatError(
            f"{X.shape[1]} samples but {len(labels)} labels"
        )
