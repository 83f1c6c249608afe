from __future__ import annotations
from functools import lru_cache
from typing import Sequence, Tuple
import numpy as np
from ..model import ArenaParams
from .geometry import Pose


@lru_cache(maxsize=8)
def _pixel_centers(size: int) -> Tuple[np.ndarray, np.ndarray]:
    centers = np.arange(size, dtype=np.float64) + 0.5
    ys, xs = np.meshgrid(centers, centers, indexing="ij")
    ys.setflags(write=False)
    xs.setflags(write=False)
    return xs, ys


def render_batch(poses: np.ndarray, params: ArenaParams) -> np.ndarray:
    """(N, 3) array of (cx, cy, theta) -> (N, size, size) float64 masks.

    A pixel is 1.0 iff its center lies inside the oriented rectangle.
    """
    poses = np.asarray(poses, dtype=np.float64).reshape(-1, 3)
    xs, ys = _pixel_centers(params.arena_size)
    cx = poses[:, 0, None, None]
    cy = poses[:, 1, None, None]
    c = np.cos(poses[:, 2])[:, None, None]
    s = np.sin(poses[:, 2])[:, None, None]
    dx = xs[None] - cx
    dy = ys[None] - cy
    u = c * dx + s * dy
    v = -s * dx + c * dy
    inside = (np.abs(u) <= 0.5 * params.rect_w) & (np.abs(v) <= 0.5 * params.rect_h)
    return inside.astype(np.float64)


def render(pose: Pose, params: ArenaParams) -> np.ndarray:
    return render_batch(np.array([pose.as_tuple()]), params)[0]


def poses_to_array(poses: Sequence[Pose]) -> np.ndarray:
    return np.array([p.as_tuple() for p in poses], dtype=np.float64).reshape(-1, 3)
