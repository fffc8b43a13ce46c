"""Binary and JSONL file formats shared by the CLI commands.

Frame files ("MMTF"): 16-byte header of magic ``MMTF``, u32 little-endian
width, u32 height, u32 channels (always 3), followed by row-major
interleaved RGB u8 pixels.

Tensor files ("MMTQ"): header of magic ``MMTQ`` and u32 little-endian value
count, followed by ``count`` f32 little-endian values.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import SchemaError

MMTF_MAGIC = b"MMTF"
MMTQ_MAGIC = b"MMTQ"

_FRAME_HEADER = struct.Struct("<4sIII")
_TENSOR_HEADER = struct.Struct("<4sI")


def write_frame(path: str | Path, pixels: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 RGB array as an MMTF file."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
        raise SchemaError(f"frame must be (H, W, 3) uint8, got {pixels.shape} {pixels.dtype}")
    height, width = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(_FRAME_HEADER.pack(MMTF_MAGIC, width, height, 3))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_frame(path: str | Path) -> np.ndarray:
    """Read an MMTF file into an (H, W, 3) uint8 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _FRAME_HEADER.size:
        raise SchemaError(f"{path}: truncated MMTF header")
    magic, width, height, channels = _FRAME_HEADER.unpack_from(raw)
    if magic != MMTF_MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}, expected {MMTF_MAGIC!r}")
    if channels != 3:
        raise SchemaError(f"{path}: unsupported channel count {channels}")
    body = raw[_FRAME_HEADER.size:]
    expected = width * height * 3
    if len(body) != expected:
        raise SchemaError(f"{path}: payload is {len(body)} bytes, expected {expected}")
    return np.frombuffer(body, dtype=np.uint8).reshape(height, width, 3).copy()


def write_tensor(path: str | Path, values: np.ndarray) -> None:
    """Write a flat f32 array as an MMTQ file."""
    values = np.asarray(values, dtype=np.float32).reshape(-1)
    with open(path, "wb") as fh:
        fh.write(_TENSOR_HEADER.pack(MMTQ_MAGIC, values.size))
        fh.write(values.astype("<f4").tobytes())


def read_tensor(path: str | Path) -> np.ndarray:
    """Read an MMTQ file into a float32 array."""
    raw = Path(path).read_bytes()
    if len(raw) < _TENSOR_HEADER.size:
        raise SchemaError(f"{path}: truncated MMTQ header")
    magic, count = _TENSOR_HEADER.unpack_from(raw)
    if magic != MMTQ_MAGIC:
        raise SchemaError(f"{path}: bad magic {magic!r}, expected {MMTQ_MAGIC!r}")
    body = raw[_TENSOR_HEADER.size:]
    if len(body) != count * 4:
        raise SchemaError(f"{path}: payload is {len(body)} bytes, expected {count * 4}")
    return np.frombuffer(body, dtype="<f4").astype(np.float32)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield one parsed object per non-empty line; malformed lines raise SchemaError."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            yield obj


def thread_cap() -> int:
    """Internal parallelism cap from the MMTF_THREADS environment variable (min 1)."""
    raw = os.environ.get("MMTF_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
