from __future__ import annotations
import math
import numpy as np
import pytest
from pokelab.exceptions import GeometryError
from pokelab.model import ArenaParams
from pokelab.sim.geometry import (Pose, Poke, center_bounds, in_bounds, intersect_poke_rect, point_in_rect,
                                  poke_endpoints, wrap_angle)
from pokelab.sim.physics import random_pose, sample_random_poke, step
from pokelab.sim.render import render, render_batch


def push_right(px: float, py: float, length: float) -> Poke:
    """Finger moving in +x, centered on (px, py)."""
    return Poke(px=px, py=py, theta=math.pi, length=length)


def test_wrap_angle():
    assert wrap_angle(0.0) == 0.0
    assert wrap_angle(2 * math.pi) == 0.0
    assert wrap_angle(-math.pi / 2) == pytest.approx(1.5 * math.pi)
    assert 0.0 <= wrap_angle(-1e-18) < 2 * math.pi


def test_poke_endpoints():
    p1, p2 = poke_endpoints(Poke(px=10, py=10, theta=0.0, length=4))
    assert p1 == pytest.approx((12.0, 10.0))
    assert p2 == pytest.approx((8.0, 10.0))


def test_nopoke_has_no_endpoints():
    with pytest.raises(GeometryError):
        poke_endpoints(Poke.nopoke())


def test_contact_on_left_edge(arena):
    pose = Pose(cx=32, cy=32, theta=0)
    contact = intersect_poke_rect(pose, push_right(22, 32, 8), arena)
    assert contact is not None
    assert contact.point == pytest.approx((24.0, 32.0))
    assert contact.push_len == pytest.approx(2.0)


def test_segment_starting_inside_pushes_full_length(arena):
    pose = Pose(cx=32, cy=32, theta=0)
    contact = intersect_poke_rect(pose, push_right(32, 32, 4), arena)
    assert contact.point == pytest.approx((30.0, 32.0))
    assert contact.push_len == pytest.approx(4.0)


def test_miss_leaves_pose_unchanged(arena):
    pose = Pose(cx=32, cy=32, theta=0.3)
    poke = push_right(5, 5, 4)
    assert intersect_poke_rect(pose, poke, arena) is None
    assert step(pose, poke, arena) == pose


def test_nopoke_leaves_pose_unchanged(arena):
    pose = Pose(cx=30, cy=33, theta=1.0)
    assert step(pose, Poke.nopoke(), arena) == pose


def test_centered_push_translates_without_rotation(arena):
    after = step(Pose(cx=32, cy=32, theta=0), push_right(22, 32, 8), arena)
    assert after.cx == pytest.approx(32 + 0.8 * 2.0)
    assert after.cy == pytest.approx(32.0)
    assert after.theta == pytest.approx(0.0, abs=1e-12)


def test_off_center_push_rotates(arena):
    # finger moving +y hits the top edge 4 px right of center
    poke = Poke(px=36, py=26, theta=1.5 * math.pi, length=8)
    after = step(Pose(cx=32, cy=32, theta=0), poke, arena)
    assert after.cx == pytest.approx(32.0, abs=1e-9)
    assert after.cy == pytest.approx(33.6, abs=1e-9)
    # k_r * s * (r x d) with r = (4, -4), d = (0, 1), s = 2
    assert after.theta == pytest.approx(0.03 * 2.0 * 4.0, abs=1e-9)


def test_wall_absorbs_translation(arena):
    pose = Pose(cx=53, cy=32, theta=0)
    after = step(pose, push_right(40, 32, 20), arena)
    assert after.cx == pytest.approx(64 - 2 - 8)
    assert in_bounds(after, arena)


def test_noisy_step_is_seeded():
    params = ArenaParams(noise_std=0.5)
    pose = Pose(cx=32, cy=32, theta=0)
    poke = push_right(22, 32, 8)
    a = step(pose, poke, params, np.random.Generator(np.random.PCG64(7)))
    b = step(pose, poke, params, np.random.Generator(np.random.PCG64(7)))
    assert a == b
    with pytest.raises(GeometryError):
        step(pose, poke, params)


def test_random_poses_and_pokes(arena, rng):
    for _ in range(200):
        pose = random_pose(arena, rng)
        assert in_bounds(pose, arena)
        poke = sample_random_poke(pose, arena, rng)
        assert point_in_rect(pose, arena, poke.px, poke.py)
        assert arena.l_min <= poke.length <= arena.l_max
        assert in_bounds(step(pose, poke, arena), arena)


def test_step_commutes_with_integer_translation(arena, rng):
    for _ in range(50):
        pose = Pose(cx=rng.uniform(28, 36), cy=rng.uniform(28, 36), theta=rng.uniform(0, 2 * math.pi))
        sampled = sample_random_poke(pose, arena, rng)
        poke = Poke(px=sampled.px, py=sampled.py, theta=sampled.theta, length=6.0)
        dx, dy = (int(v) for v in rng.integers(-4, 5, size=2))
        moved = step(pose, poke, arena).translated(dx, dy)
        shifted = step(pose.translated(dx, dy), poke.translated(dx, dy), arena)
        assert shifted.cx == pytest.approx(moved.cx, abs=1e-9)
        assert shifted.cy == pytest.approx(moved.cy, abs=1e-9)
        assert math.remainder(shifted.theta - moved.theta, 2 * math.pi) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("dx, dy", [(3, 5), (-6, 2), (0, -7)])
def test_render_commutes_with_integer_translation(arena, dx, dy):
    pose = Pose(cx=30.25, cy=31.5, theta=0.3)
    image = render(pose, arena)
    shifted = render(pose.translated(dx, dy), arena)
    np.testing.assert_array_equal(np.roll(image, (dy, dx), axis=(0, 1)), shifted)


def test_poke_angles_are_uniform(arena):
    rng = np.random.Generator(np.random.PCG64(2024))
    pose = Pose(cx=32, cy=32, theta=0.7)
    n = 100_000
    thetas = np.array([sample_random_poke(pose, arena, rng).theta for _ in range(n)])
    counts, _ = np.histogram(thetas, bins=36, range=(0.0, 2 * math.pi))
    p = 1.0 / 36
    sigma = math.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) < 5 * sigma)


def test_random_poses_span_the_feasible_range(arena):
    rng = np.random.Generator(np.random.PCG64(99))
    xs = np.array([random_pose(arena, rng).cx for _ in range(10_000)])
    (lo, hi), _ = center_bounds(math.pi / 2, arena)
    width = hi - lo
    assert lo - 1e-9 <= xs.min() < lo + 0.02 * width
    assert hi - 0.02 * width < xs.max() <= hi + 1e-9


def test_render_axis_aligned_pixel_count(arena):
    image = render(Pose(cx=32, cy=32, theta=0), arena)
    assert image.shape == (64, 64)
    assert image.sum() == 16 * 8
    assert set(np.unique(image)) <= {0.0, 1.0}


def test_render_batch_matches_single(arena, rng):
    poses = [random_pose(arena, rng) for _ in range(5)]
    batch = render_batch(np.array([p.as_tuple() for p in poses]), arena)
    for img, pose in zip(batch, poses):
        np.testing.assert_array_equal(img, render(pose, arena))


def test_arena_rejects_cramped_geometry():
    with pytest.raises(ValueError):
        ArenaParams(arena_size=18)
    with pytest.raises(ValueError):
        ArenaParams(k_t=1.5)
