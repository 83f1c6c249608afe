from __future__ import annotations
import math
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from ..model import ArenaParams
from ..sim.geometry import Poke, TWO_PI, wrap_angle

GRID = 20
LOC_BINS = GRID * GRID
ANGLE_BINS = 36
LEN_BINS = 11
NOPOKE_BIN = LEN_BINS - 1
ACTION_DIM = 5
ANGLE_WIDTH = TWO_PI / ANGLE_BINS


class DiscretizedAction(BaseModel):
    model_config = ConfigDict(frozen=True)

    loc_bin: int = Field(ge=0, lt=LOC_BINS)
    angle_bin: int = Field(ge=0, lt=ANGLE_BINS)
    len_bin: int = Field(ge=0, lt=LEN_BINS)

    @property
    def is_nopoke(self) -> bool:
        return self.len_bin == NOPOKE_BIN


def _grid_index(v: float, size: int) -> int:
    return min(max(int(math.floor(GRID * v / size)), 0), GRID - 1)


def discretize(poke: Poke, params: ArenaParams) -> DiscretizedAction:
    """20x20 location grid (row from y, row-major), 10-degree angle bins, 10 length bins + no-poke."""
    if poke.is_nopoke:
        return DiscretizedAction(loc_bin=0, angle_bin=0, len_bin=NOPOKE_BIN)
    row = _grid_index(poke.py, params.arena_size)
    col = _grid_index(poke.px, params.arena_size)
    angle_bin = int(math.floor(wrap_angle(poke.theta) / ANGLE_WIDTH)) % ANGLE_BINS
    span = params.l_max - params.l_min
    len_bin = min(max(int(math.floor(10.0 * (poke.length - params.l_min) / span)), 0), 9)
    return DiscretizedAction(loc_bin=row * GRID + col, angle_bin=angle_bin, len_bin=len_bin)


def undiscretize(action: DiscretizedAction, params: ArenaParams) -> Poke:
    """Bin centers; len_bin 10 maps to the no-poke."""
    if action.is_nopoke:
        return Poke.nopoke()
    cell = params.arena_size / GRID
    row, col = divmod(action.loc_bin, GRID)
    span = params.l_max - params.l_min
    return Poke(
        px=(col + 0.5) * cell,
        py=(row + 0.5) * cell,
        theta=(action.angle_bin + 0.5) * ANGLE_WIDTH,
        length=params.l_min + (action.len_bin + 0.5) * span / 10.0,
    )


def encode_poke(poke: Poke, params: ArenaParams) -> np.ndarray:
    """Real-valued action (px, py, cos θ, sin θ, l) scaled to [-1, 1]; no-poke is (0, 0, 0, 0, -1)."""
    if poke.is_nopoke:
        return np.array([0.0, 0.0, 0.0, 0.0, -1.0])
    size = float(params.arena_size)
    span = params.l_max - params.l_min
    return np.array([
        2.0 * poke.px / size - 1.0,
        2.0 * poke.py / size - 1.0,
        math.cos(poke.theta),
        math.sin(poke.theta),
        2.0 * (poke.length - params.l_min) / span - 1.0,
    ])


def targets_from_rows(rows: np.ndarray, params: ArenaParams) -> np.ndarray:
    """Vectorised discretize over (N, 11) record rows -> (N, 3) int bins."""
    size = params.arena_size
    span = params.l_max - params.l_min
    px, py, th, length, nopoke = rows[:, 3], rows[:, 4], rows[:, 5], rows[:, 6], rows[:, 7]
    col = np.clip(np.floor(GRID * px / size), 0, GRID - 1).astype(np.int64)
    row = np.clip(np.floor(GRID * py / size), 0, GRID - 1).astype(np.int64)
    angle = np.floor(np.mod(th, TWO_PI) / ANGLE_WIDTH).astype(np.int64) % ANGLE_BINS
    lbin = np.clip(np.floor(10.0 * (length - params.l_min) / span), 0, 9).astype(np.int64)
    out = np.stack([row * GRID + col, angle, lbin], axis=1)
    out[nopoke != 0.0] = (0, 0, NOPOKE_BIN)
    return out


def encode_rows(rows: np.ndarray, params: ArenaParams) -> np.ndarray:
    """Vectorised encode_poke over (N, 11) record rows -> (N, 5)."""
    size = float(params.arena_size)
    span = params.l_max - params.l_min
    px, py, th, length, nopoke = rows[:, 3], rows[:, 4], rows[:, 5], rows[:, 6], rows[:, 7]
    out = np.stack([2.0 * px / size - 1.0, 2.0 * py / size - 1.0, np.cos(th), np.sin(th),
                    2.0 * (length - params.l_min) / span - 1.0], axis=1)
    out[nopoke != 0.0] = (0.0, 0.0, 0.0, 0.0, -1.0)
    return out
