"""POKD files: a fixed little-endian header followed by packed f32 records.

    header  "<4sH9fQQ"  magic, version, ArenaParams (9 x f32), record_count, seed
    record  "<11f"      cx, cy, theta | px, py, poke_theta, length, is_nopoke | cx', cy', theta'
"""
from __future__ import annotations
import struct
from pathlib import Path
from typing import Optional
import numpy as np
from pydantic import BaseModel, ConfigDict
from ..exceptions import DatasetFormatError
from ..model import ArenaParams
from .base import RecordSource, InteractionRecord, RECORD_FIELDS

MAGIC = b"POKD"
VERSION = 1
PRNG_NAME = "pcg64"
HEADER_STRUCT = struct.Struct("<4sH9fQQ")
RECORD_STRUCT = struct.Struct(f"<{RECORD_FIELDS}f")
HEADER_SIZE = HEADER_STRUCT.size
RECORD_SIZE = RECORD_STRUCT.size
_RECORD_DTYPE = np.dtype("<f4")


class DatasetHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    magic: bytes = MAGIC
    version: int = VERSION
    params: ArenaParams
    record_count: int
    seed: int

    def pack(self) -> bytes:
        return HEADER_STRUCT.pack(self.magic, self.version, *self.params.as_floats(),
                                  self.record_count, self.seed)

    @classmethod
    def unpack(cls, raw: bytes) -> "DatasetHeader":
        if len(raw) < HEADER_SIZE:
            raise DatasetFormatError("truncated header")
        magic, version, *rest = HEADER_STRUCT.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise DatasetFormatError(f"bad magic: {magic!r}")
        if version != VERSION:
            raise DatasetFormatError(f"unsupported version: {version}")
        floats, count, seed = rest[:9], rest[9], rest[10]
        try:
            params = ArenaParams.from_floats(list(floats))
        except ValueError as e:
            raise DatasetFormatError(f"invalid arena params in header: {e}") from e
        return cls(magic=magic, version=version, params=params, record_count=count, seed=seed)

    def expected_file_size(self) -> int:
        return HEADER_SIZE + self.record_count * RECORD_SIZE


class DatasetWriter:
    """Single-writer appender; the record count is patched into the header on close."""

    def __init__(self, path: str | Path, params: ArenaParams, seed: int) -> None:
        self.path = Path(path)
        self.params = params
        self.seed = seed
        self.count = 0
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "wb")
        self._fh.write(DatasetHeader(params=params, record_count=0, seed=seed).pack())

    def write(self, record: InteractionRecord) -> None:
        self._fh.write(RECORD_STRUCT.pack(*record.to_row()))
        self.count += 1

    def close(self) -> DatasetHeader:
        header = DatasetHeader(params=self.params, record_count=self.count, seed=self.seed)
        if self._fh is not None:
            self._fh.seek(0)
            self._fh.write(header.pack())
            self._fh.close()
            self._fh = None
        return header

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


class PokeDataset(RecordSource):
    """Read-only memory-mapped view; safe to share between reader threads."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        if not self.path.exists():
            raise FileNotFoundError(f"dataset not found: {self.path}")
        with open(self.path, "rb") as fh:
            self.header = DatasetHeader.unpack(fh.read(HEADER_SIZE))
        size = self.path.stat().st_size
        if size != self.header.expected_file_size():
            raise DatasetFormatError(
                f"file size {size} does not match record_count {self.header.record_count}")
        self.params = self.header.params
        self._map: Optional[np.memmap] = None
        if self.header.record_count:
            self._map = np.memmap(self.path, dtype=_RECORD_DTYPE, mode="r", offset=HEADER_SIZE,
                                  shape=(self.header.record_count, RECORD_FIELDS))

    def __len__(self) -> int:
        return self.header.record_count

    def rows(self) -> np.ndarray:
        if self._map is None:
            return np.zeros((0, RECORD_FIELDS), dtype=np.float64)
        return self._map

    def close(self) -> None:
        self._map = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def read_header(path: str | Path) -> DatasetHeader:
    with open(path, "rb") as fh:
        return DatasetHeader.unpack(fh.read(HEADER_SIZE))


def read_record(path: str | Path, index: int) -> InteractionRecord:
    return PokeDataset(path).read_record(index)


def write_records(path: str | Path, records, params: ArenaParams, seed: int = 0) -> DatasetHeader:
    with DatasetWriter(path, params, seed) as writer:
        for rec in records:
            writer.write(rec)
    return writer.close()
