"""Binary container for trained models and feature matrices.

Layout (all integers little-endian)::

    b"DDL1"                    magic
    uint32                     length of the JSON header in bytes
    header                     UTF-8 JSON
    payload                    float64 little-endian, row-major

For models the payload holds every dictionary in layer order. For features
it holds the matrix, optionally followed by int32 labels.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from deepdict.deep import DeepDictModel
from deepdict.exceptions import DataFormatError, DimensionError

MAGIC = b"DDL1"
FORMAT_VERSION = 1
_F64 = np.dtype("<f8")
_I32 = np.dtype("<i4")


def _write(path, header: dict, blocks) -> None:
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(head)))
        f.write(head)
        for block in blocks:
            f.write(block.tobytes(order="C"))


def _read(path) -> tuple[dict, memoryview]:
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 8:
        raise DataFormatError(f"{path}: file too short")
    magic = buf[:4]
    if magic != MAGIC:
        if magic[:3] == MAGIC[:3]:
            raise DataFormatError(
                f"{path}: unsupported format version {magic!r}, expected {MAGIC!r}"
            )
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    (hlen,) = struct.unpack("<I", buf[4:8])
    if 8 + hlen > len(buf):
        raise DataFormatError(f"{path}: header length {hlen} exceeds file size")
    try:
        header = json.loads(buf[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: malformed header: {exc}") from exc
    if not isinstance(header, dict):
        raise DataFormatError(f"{path}: header is not a JSON object")
    if header.get("format_version") != FORMAT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported format_version {header.get('format_version')!r}"
        )
    return header, memoryview(buf)[8 + hlen:]


def _shape(value, path) -> tuple[int, int]:
    if (not isinstance(value, list) or len(value) != 2
            or not all(isinstance(v, int) and v >= 1 for v in value)):
        raise DataFormatError(f"{path}: bad matrix shape {value!r}")
    return value[0], value[1]


def read_header(path) -> dict:
    header, _ = _read(path)
    return header


def save_model(model: DeepDictModel, path) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "type": "model",
        "input_dim": model.input_dim,
        "layer_shapes": [list(layer.shape) for layer in model.layers],
        "kinds": model.kinds,
        "lam": float(model.lam),
        "ista_iters": int(model.ista_iters),
        "step_safety": float(model.step_safety),
        "config": model.config,
    }
    _write(path, header, [np.ascontiguousarray(D, dtype=_F64) for D in model.dictionaries])


def load_model(path) -> DeepDictModel:
    header, payload = _read(path)
    if header.get("type") != "model":
        raise DataFormatError(f"{path}: holds {header.get('type')!r}, not a model")
    try:
        shapes = [_shape(s, path) for s in header["layer_shapes"]]
        kinds = list(header["kinds"])
        input_dim = int(header["input_dim"])
        lam = float(header["lam"])
        ista_iters = int(header["ista_iters"])
        step_safety = float(header["step_safety"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: incomplete model header: {exc}") from exc
    if not shapes:
        raise DataFormatError(f"{path}: model has no layers")
    if len(kinds) != len(shapes):
        raise DataFormatError(f"{path}: {len(kinds)} kinds for {len(shapes)} layers")
    if shapes[0][0] != input_dim:
        raise DataFormatError(f"{path}: input_dim {input_dim} != first layer rows {shapes[0][0]}")

    expected = sum(r * c for r, c in shapes) * _F64.itemsize
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    dictionaries = []
    offset = 0
    for r, c in shapes:
        n = r * c
        D = np.frombuffer(payload, dtype=_F64, count=n, offset=offset).reshape(r, c)
        dictionaries.append(D.astype(np.float64))
        offset += n * _F64.itemsize
    try:
        return DeepDictModel.from_dictionaries(
            dictionaries, kinds, lam=lam, ista_iters=ista_iters,
            step_safety=step_safety, config=header.get("config") or {},
        )
    except (DimensionError, ValueError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_features(features, path, labels=None) -> None:
    F = np.ascontiguousarray(features, dtype=_F64)
    if F.ndim != 2:
        raise DimensionError(f"features must be 2-D, got shape {F.shape}")
    header = {
        "format_version": FORMAT_VERSION,
        "type": "features",
        "shape": list(F.shape),
        "n_labels": None,
    }
    blocks = [F]
    if labels is not None:
        y = np.asarray(labels)
        if y.shape != (F.shape[1],):
            raise DimensionError(f"{y.shape} labels for {F.shape[1]} feature columns")
        header["n_labels"] = int(y.shape[0])
        blocks.append(np.ascontiguousarray(y, dtype=_I32))
    _write(path, header, blocks)


def load_features(path) -> tuple[np.ndarray, np.ndarray | None]:
    header, payload = _read(path)
    if header.get("type") != "features":
        raise DataFormatError(f"{path}: holds {header.get('type')!r}, not features")
    rows, cols = _shape(header.get("shape"), path)
    n_labels = header.get("n_labels")
    if n_labels is not None and n_labels != cols:
        raise DataFormatError(f"{path}: {n_labels} labels for {cols} feature columns")
    expected = rows * cols * _F64.itemsize + (cols * _I32.itemsize if n_labels is not None else 0)
    if len(payload) != expected:
        raise DataFormatError(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    F = np.frombuffer(payload, dtype=_F64, count=rows * cols).reshape(rows, cols)
    F = F.astype(np.float64)
    labels = None
    if n_labels is not None:
        labels = np.frombuffer(payload, dtype=_I32, count=cols,
                               offset=rows * cols * _F64.itemsize).astype(np.int64)
    return F, labels
