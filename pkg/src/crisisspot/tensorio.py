"""Binary tensor files and checkpoint containers.

Tensor file layout (little-endian)::

    b"CSPT" | version u16 | rows u32 | cols u32 | rows*cols float32, row-major

A checkpoint is ``b"CSCK" | version u16 | header_len u32 | header JSON``
followed by one tensor blob per entry of ``header["tensors"]``, in order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ResolutionError, ShapeError

TENSOR_MAGIC = b"CSPT"
TENSOR_VERSION = 1
_TENSOR_HEADER = struct.Struct("<4sHII")

CHECKPOINT_MAGIC = b"CSCK"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sHI")


def tensor_to_bytes(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.ndim != 2:
        raise ShapeError(f"tensor files hold 2-D arrays, got shape {array.shape}")
    rows, cols = array.shape
    payload = np.ascontiguousarray(array, dtype="<f4").tobytes()
    return _TENSOR_HEADER.pack(TENSOR_MAGIC, TENSOR_VERSION, rows, cols) + payload


def tensor_from_bytes(buf: bytes, offset: int = 0, source: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; returns the array and the end offset."""
    if len(buf) - offset < _TENSOR_HEADER.size:
        raise FormatError(f"{source}: truncated header")
    magic, version, rows, cols = _TENSOR_HEADER.unpack_from(buf, offset)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{source}: bad magic {magic!r}")
    if version != TENSOR_VERSION:
        raise FormatError(f"{source}: unsupported tensor version {version}")
    if rows == 0 or cols == 0:
        raise FormatError(f"{source}: empty tensor ({rows}x{cols})")
    start = offset + _TENSOR_HEADER.size
    end = start + 4 * rows * cols
    if len(buf) < end:
        raise FormatError(f"{source}: truncated payload, expected {rows}x{cols} float32 values")
    arr = np.frombuffer(buf, dtype="<f4", count=rows * cols, offset=start).reshape(rows, cols)
    return arr.astype(np.float32), end


def save_tensor(path: str | Path, array: np.ndarray) -> None:
    Path(path).write_bytes(tensor_to_bytes(array))


def load_tensor(path: str | Path) -> np.ndarray:
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError:
        raise ResolutionError(f"tensor file not found: {path}") from None
    arr, end = tensor_from_bytes(buf, source=str(path))
    if end != len(buf):
        raise FormatError(f"{path}: {len(buf) - end} trailing bytes after payload")
    return arr


def read_tensor_shape(path: str | Path) -> tuple[int, int]:
    """Header-only read."""
    try:
        with open(path, "rb") as fh:
            head = fh.read(_TENSOR_HEADER.size)
    except FileNotFoundError:
        raise ResolutionError(f"tensor file not found: {path}") from None
    if len(head) < _TENSOR_HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, _, rows, cols = _TENSOR_HEADER.unpack(head)
    if magic != TENSOR_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    return rows, cols


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    entries = [{"name": k, "shape": list(np.shape(v))} for k, v in tensors.items()]
    header = dict(meta, tensors=entries)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [_CKPT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)), blob]
    for value in tensors.values():
        value = np.asarray(value)
        parts.append(tensor_to_bytes(value.reshape(1, -1) if value.ndim != 2 else value))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        buf = Path(path).read_bytes()
    except FileNotFoundError:
        raise ResolutionError(f"checkpoint not found: {path}") from None
    if len(buf) < _CKPT_HEADER.size:
        raise FormatError(f"{path}: truncated checkpoint header")
    magic, version, hlen = _CKPT_HEADER.unpack_from(buf)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    offset = _CKPT_HEADER.size
    try:
        header = json.loads(buf[offset:offset + hlen])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: corrupt checkpoint header ({exc})") from None
    offset += hlen
    tensors = {}
    for entry in header.pop("tensors"):
        arr, offset = tensor_from_bytes(buf, offset, source=f"{path}:{entry['name']}")
        tensors[entry["name"]] = arr.reshape(entry["shape"])
    return tensors, header
