from .geometry import Pose, Poke, Contact, poke_endpoints, intersect_poke_rect, point_in_rect, in_bounds, center_bounds
from .physics import step, random_pose, sample_random_poke
from .render import render, render_batch, poses_to_array

__all__ = [
    "Pose", "Poke", "Contact", "poke_endpoints", "intersect_poke_rect", "point_in_rect",
    "in_bounds", "center_bounds", "step", "random_pose", "sample_random_poke",
    "render", "render_batch", "poses_to_array",
]
