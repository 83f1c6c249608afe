"""Geometry-blind baseline: find the object by thresholding and image moments,
then poke it along the centroid difference towards the goal."""
from __future__ import annotations
import math
from typing import Optional
import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from .exceptions import DetectionError
from .model import ArenaParams, BlobConfig
from .planner import Episode, rollout
from .sim.geometry import Pose, Poke, wrap_angle
from .sim.render import render
from .types import Point

FOREGROUND = 0.5


class BlobEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    centroid: Point
    major_axis_angle: float = Field(ge=0.0, lt=math.pi)
    pixel_count: int = Field(gt=0)


def detect_blob(image: np.ndarray) -> BlobEstimate:
    """Centroid and principal axis of the pixels brighter than 0.5 (pixel centers at +0.5)."""
    image = np.asarray(image, dtype=np.float64)
    rows, cols = np.nonzero(image > FOREGROUND)
    if rows.size == 0:
        raise DetectionError("no foreground pixels")
    xs = cols + 0.5
    ys = rows + 0.5
    cx, cy = float(xs.mean()), float(ys.mean())
    mu20 = float(np.mean((xs - cx) ** 2))
    mu02 = float(np.mean((ys - cy) ** 2))
    mu11 = float(np.mean((xs - cx) * (ys - cy)))
    angle = 0.5 * math.atan2(2.0 * mu11, mu20 - mu02)
    angle = math.fmod(angle + math.pi, math.pi)
    if angle >= math.pi:
        angle = 0.0
    return BlobEstimate(centroid=(cx, cy), major_axis_angle=angle, pixel_count=int(rows.size))


def blob_next_poke(current: BlobEstimate, goal_centroid: Point, arena: ArenaParams,
                   config: BlobConfig) -> Optional[Poke]:
    """None once the centroid is within `threshold` of the goal."""
    vx = goal_centroid[0] - current.centroid[0]
    vy = goal_centroid[1] - current.centroid[1]
    dist = math.hypot(vx, vy)
    if dist < config.threshold:
        return None
    length = min(max(dist * config.len_gain, arena.l_min), arena.l_max)
    # the finger travels along -(cos θ, sin θ)
    theta = wrap_angle(math.atan2(vy, vx) + math.pi)
    return Poke(px=current.centroid[0], py=current.centroid[1], theta=theta, length=length)


def run_blob_episode(init: Pose, goal: Pose, arena: ArenaParams, config: BlobConfig,
                     rng: Optional[np.random.Generator] = None) -> Episode:
    goal_centroid = detect_blob(render(goal, arena)).centroid

    def policy(pose: Pose) -> Optional[Poke]:
        return blob_next_poke(detect_blob(render(pose, arena)), goal_centroid, arena, config)

    return rollout(init, goal, policy, arena, config.max_pokes, stop_reason="threshold", rng=rng)
