"""POKM checkpoints: magic, u16 version, u32 descriptor length, msgpack
descriptor, then every parameter array as little-endian f64 in descriptor order."""
from __future__ import annotations
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple
import msgpack
import numpy as np
from ..exceptions import CheckpointError

MAGIC = b"POKM"
VERSION = 1
_PREFIX = struct.Struct("<4sHI")


def save_checkpoint(path: str | Path, descriptor: Dict[str, Any], arrays: List[Tuple[str, np.ndarray]]) -> None:
    meta = dict(descriptor)
    meta["arrays"] = [[name, list(arr.shape)] for name, arr in arrays]
    packed = msgpack.packb(meta, use_bin_type=True)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(packed)))
        fh.write(packed)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise CheckpointError("truncated checkpoint")
    magic, version, meta_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic: {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported version: {version}")
    offset = _PREFIX.size
    try:
        meta = msgpack.unpackb(raw[offset:offset + meta_len], raw=False, strict_map_key=False)
    except Exception as e:
        raise CheckpointError(f"corrupt descriptor: {e}") from e
    offset += meta_len

    arrays: Dict[str, np.ndarray] = {}
    for name, shape in meta.get("arrays", []):
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"truncated parameters at '{name}'")
        arrays[name] = np.frombuffer(raw[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(raw):
        raise CheckpointError("trailing bytes after parameters")
    return meta, arrays
