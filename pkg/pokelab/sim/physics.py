"""Quasi-static poking of a single rectangle.

A push of length s after contact moves the center by k_t*s along the finger
direction and turns the body by k_r*s times the lever arm (r x d). Walls absorb
whatever translation would carry the rectangle out of the arena.
"""
from __future__ import annotations
import math
from typing import Optional
import numpy as np
from ..exceptions import GeometryError
from ..model import ArenaParams
from .geometry import Pose, Poke, TWO_PI, center_bounds, intersect_poke_rect, point_in_rect, half_extents, poke_endpoints

MAX_REJECTION_DRAWS = 10_000


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def clamp_pose(pose: Pose, params: ArenaParams) -> Pose:
    (x_lo, x_hi), (y_lo, y_hi) = center_bounds(pose.theta, params)
    return Pose(cx=_clamp(pose.cx, x_lo, x_hi), cy=_clamp(pose.cy, y_lo, y_hi), theta=pose.theta)


def step(pose: Pose, poke: Poke, params: ArenaParams, rng: Optional[np.random.Generator] = None) -> Pose:
    contact = intersect_poke_rect(pose, poke, params)
    if contact is None:
        return pose

    p1, p2 = poke_endpoints(poke)
    seg = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    if seg == 0.0:
        return pose
    dx, dy = (p2[0] - p1[0]) / seg, (p2[1] - p1[1]) / seg
    rx, ry = contact.point[0] - pose.cx, contact.point[1] - pose.cy
    s = contact.push_len

    move_x = params.k_t * s * dx
    move_y = params.k_t * s * dy
    turn = params.k_r * s * (rx * dy - ry * dx)

    if params.noise_std > 0.0:
        if rng is None:
            raise GeometryError("noisy step needs an rng")
        nx, ny = rng.normal(0.0, params.noise_std, size=2)
        move_x += nx
        move_y += ny
        turn += rng.normal(0.0, params.noise_std / (0.5 * params.rect_w))

    moved = Pose(cx=pose.cx + move_x, cy=pose.cy + move_y, theta=pose.theta + turn)
    return clamp_pose(moved, params)


def random_pose(params: ArenaParams, rng: np.random.Generator) -> Pose:
    theta = float(rng.uniform(0.0, TWO_PI))
    (x_lo, x_hi), (y_lo, y_hi) = center_bounds(theta, params)
    return Pose(cx=float(rng.uniform(x_lo, x_hi)), cy=float(rng.uniform(y_lo, y_hi)), theta=theta)


def sample_random_poke(pose: Pose, params: ArenaParams, rng: np.random.Generator) -> Poke:
    """Poke centred on a uniformly drawn point of the object (rejection over its bounding box)."""
    ex, ey = half_extents(pose.theta, params)
    for _ in range(MAX_REJECTION_DRAWS):
        x = float(rng.uniform(pose.cx - ex, pose.cx + ex))
        y = float(rng.uniform(pose.cy - ey, pose.cy + ey))
        if point_in_rect(pose, params, x, y):
            break
    else:
        raise GeometryError(f"no point inside the object after {MAX_REJECTION_DRAWS} draws")
    theta = float(rng.uniform(0.0, TWO_PI))
    length = float(rng.uniform(params.l_min, params.l_max))
    return Poke(px=x, py=y, theta=theta, length=length)
