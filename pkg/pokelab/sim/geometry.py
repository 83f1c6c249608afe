from __future__ import annotations
import math
from typing import Optional, Tuple
from pydantic import BaseModel, ConfigDict, field_validator
from ..exceptions import GeometryError
from ..model import ArenaParams
from ..types import Point

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Map any angle into [0, 2π)."""
    out = math.fmod(theta, TWO_PI)
    if out < 0.0:
        out += TWO_PI
    if out >= TWO_PI:
        out = 0.0
    return out


class Pose(BaseModel):
    """Rectangle center (pixels) and orientation of its long axis (radians)."""
    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    theta: float = 0.0

    @field_validator("theta")
    @classmethod
    def normalize_theta(cls, v: float) -> float:
        return wrap_angle(float(v))

    @property
    def center(self) -> Point:
        return (self.cx, self.cy)

    def translated(self, dx: float, dy: float) -> "Pose":
        return Pose(cx=self.cx + dx, cy=self.cy + dy, theta=self.theta)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.cx, self.cy, self.theta)


class Poke(BaseModel):
    """Finger sweep of length `length` centred on (px, py); the finger moves p1 -> p2."""
    model_config = ConfigDict(frozen=True)

    px: float = 0.0
    py: float = 0.0
    theta: float = 0.0
    length: float = 0.0
    is_nopoke: bool = False

    @classmethod
    def nopoke(cls) -> "Poke":
        return cls(is_nopoke=True)

    @property
    def motion_angle(self) -> float:
        return wrap_angle(self.theta + math.pi)

    def translated(self, dx: float, dy: float) -> "Poke":
        if self.is_nopoke:
            return self
        return self.model_copy(update={"px": self.px + dx, "py": self.py + dy})


class Contact(BaseModel):
    model_config = ConfigDict(frozen=True)

    point: Point
    push_len: float


def poke_endpoints(poke: Poke) -> Tuple[Point, Point]:
    """(p1, p2) with p1 = p + (l/2)(cos θ, sin θ) and p2 = p - (l/2)(cos θ, sin θ)."""
    if poke.is_nopoke:
        raise GeometryError("no endpoints for no-poke")
    hx = 0.5 * poke.length * math.cos(poke.theta)
    hy = 0.5 * poke.length * math.sin(poke.theta)
    return (poke.px + hx, poke.py + hy), (poke.px - hx, poke.py - hy)


def to_local(pose: Pose, x: float, y: float) -> Point:
    """Arena point -> rectangle frame (u along the long axis)."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = x - pose.cx, y - pose.cy
    return (c * dx + s * dy, -s * dx + c * dy)


def point_in_rect(pose: Pose, params: ArenaParams, x: float, y: float) -> bool:
    u, v = to_local(pose, x, y)
    return abs(u) <= 0.5 * params.rect_w and abs(v) <= 0.5 * params.rect_h


def half_extents(theta: float, params: ArenaParams) -> Point:
    """Half width/height of the axis-aligned box around the rotated rectangle."""
    c, s = abs(math.cos(theta)), abs(math.sin(theta))
    hw, hh = 0.5 * params.rect_w, 0.5 * params.rect_h
    return (hw * c + hh * s, hw * s + hh * c)


def center_bounds(theta: float, params: ArenaParams) -> Tuple[Point, Point]:
    """((x_lo, x_hi), (y_lo, y_hi)) feasible center range for this orientation."""
    ex, ey = half_extents(theta, params)
    lo = params.wall_margin
    hi = params.arena_size - params.wall_margin
    return (lo + ex, hi - ex), (lo + ey, hi - ey)


def in_bounds(pose: Pose, params: ArenaParams, tol: float = 1e-4) -> bool:
    (x_lo, x_hi), (y_lo, y_hi) = center_bounds(pose.theta, params)
    return (x_lo - tol <= pose.cx <= x_hi + tol) and (y_lo - tol <= pose.cy <= y_hi + tol)


def intersect_poke_rect(pose: Pose, poke: Poke, params: ArenaParams) -> Optional[Contact]:
    """First crossing of the segment p1 -> p2 with the rectangle, clipped Liang-Barsky style."""
    if poke.is_nopoke:
        return None
    p1, p2 = poke_endpoints(poke)
    u1, v1 = to_local(pose, *p1)
    u2, v2 = to_local(pose, *p2)
    du, dv = u2 - u1, v2 - v1
    hw, hh = 0.5 * params.rect_w, 0.5 * params.rect_h

    t_enter, t_exit = 0.0, 1.0
    for p, q in ((-du, u1 + hw), (du, hw - u1), (-dv, v1 + hh), (dv, hh - v1)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        t = q / p
        if p < 0.0:
            t_enter = max(t_enter, t)
        else:
            t_exit = min(t_exit, t)
        if t_enter > t_exit:
            return None

    seg_len = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    point = (p1[0] + t_enter * (p2[0] - p1[0]), p1[1] + t_enter * (p2[1] - p1[1]))
    return Contact(point=point, push_len=(1.0 - t_enter) * seg_len)
