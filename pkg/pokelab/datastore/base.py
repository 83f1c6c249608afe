from __future__ import annotations
from abc import ABC, abstractmethod
from typing import Iterator
import numpy as np
from pydantic import BaseModel, ConfigDict
from ..exceptions import RecordIndexError
from ..model import ArenaParams
from ..sim.geometry import Pose, Poke

RECORD_FIELDS = 11


class InteractionRecord(BaseModel):
    """One (pose_t, poke, pose_t1) triple; images are re-rendered from the poses."""
    model_config = ConfigDict(frozen=True)

    pose_t: Pose
    poke: Poke
    pose_t1: Pose

    def to_row(self) -> list[float]:
        k = self.poke
        return [*self.pose_t.as_tuple(), k.px, k.py, k.theta, k.length,
                1.0 if k.is_nopoke else 0.0, *self.pose_t1.as_tuple()]

    @classmethod
    def from_row(cls, row) -> "InteractionRecord":
        v = [float(x) for x in row]
        if v[7] != 0.0:
            poke = Poke.nopoke()
        else:
            poke = Poke(px=v[3], py=v[4], theta=v[5], length=v[6])
        return cls(pose_t=Pose(cx=v[0], cy=v[1], theta=v[2]), poke=poke,
                   pose_t1=Pose(cx=v[8], cy=v[9], theta=v[10]))


class RecordSource(ABC):
    """Random-access collection of interaction records sharing one ArenaParams."""

    params: ArenaParams

    @abstractmethod
    def __len__(self) -> int: ...
    @abstractmethod
    def rows(self) -> np.ndarray:
        """All records as an (N, 11) array in on-disk field order."""

    def read_record(self, index: int) -> InteractionRecord:
        if not 0 <= index < len(self):
            raise RecordIndexError(f"index out of range: {index} (record_count {len(self)})")
        return InteractionRecord.from_row(self.rows()[index])

    def __iter__(self) -> Iterator[InteractionRecord]:
        for i in range(len(self)):
            yield self.read_record(i)


class ArrayDataset(RecordSource):
    """In-memory records, used for subsets and tests."""

    def __init__(self, rows: np.ndarray, params: ArenaParams) -> None:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != RECORD_FIELDS:
            raise ValueError(f"expected (N, {RECORD_FIELDS}) rows, got {rows.shape}")
        self._rows = rows
        self.params = params

    @classmethod
    def from_records(cls, records: list[InteractionRecord], params: ArenaParams) -> "ArrayDataset":
        return cls(np.array([r.to_row() for r in records], dtype=np.float64).reshape(-1, RECORD_FIELDS), params)

    def __len__(self) -> int:
        return self._rows.shape[0]

    def rows(self) -> np.ndarray:
        return self._rows

    def subset(self, indices) -> "ArrayDataset":
        return ArrayDataset(self._rows[np.asarray(indices, dtype=np.int64)], self.params)
