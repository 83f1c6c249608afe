from __future__ import annotations
import math
import numpy as np
import pytest
from pokelab.exceptions import PlanningError, ShapeError
from pokelab.model import ArenaParams, PlannerConfig
from pokelab.planner import model_policy, plan_next_poke, read_episodes, rollout, run_episode, write_episodes
from pokelab.sim.geometry import Pose, Poke
from pokelab.sim.render import render


def push_from_center(pose: Pose) -> Poke:
    return Poke(px=pose.cx, py=pose.cy, theta=math.pi, length=4.0)


def test_stopping_policy_gives_empty_episode(arena):
    init, goal = Pose(cx=30, cy=30, theta=0), Pose(cx=40, cy=30, theta=0)
    episode = rollout(init, goal, lambda pose: None, arena, max_pokes=10)
    assert episode.steps == []
    assert episode.terminal_reason == "no-poke"
    assert episode.final == init
    assert episode.poses == [init]


def test_nopoke_action_also_stops(arena):
    episode = rollout(Pose(cx=30, cy=30, theta=0), Pose(cx=40, cy=30, theta=0),
                      lambda pose: Poke.nopoke(), arena, max_pokes=5, stop_reason="threshold")
    assert episode.terminal_reason == "threshold"
    assert len(episode.steps) == 0


def test_rollout_is_bounded_and_chains_poses(arena):
    init = Pose(cx=18, cy=32, theta=0)
    episode = rollout(init, Pose(cx=50, cy=32, theta=0), push_from_center, arena, max_pokes=3)
    assert len(episode.steps) == 3
    assert episode.terminal_reason == "max-steps"
    for before, after in zip(episode.steps, episode.steps[1:]):
        assert after.pose_before == before.pose_after
    assert episode.final.cx == pytest.approx(18 + 3 * 0.8 * 4.0)


def test_rollout_rejects_zero_budget(arena):
    pose = Pose(cx=30, cy=30, theta=0)
    with pytest.raises(PlanningError):
        rollout(pose, pose, push_from_center, arena, max_pokes=0)


def test_model_episode_respects_budget(random_model, small_arena):
    config = PlannerConfig(max_pokes=4)
    episode = run_episode(Pose(cx=18, cy=18, theta=0), Pose(cx=22, cy=16, theta=0.3), random_model,
                          small_arena, config)
    assert len(episode.steps) <= 4
    if len(episode.steps) < 4:
        assert episode.terminal_reason == "no-poke"


def test_model_episode_is_deterministic(random_model, small_arena):
    config = PlannerConfig(max_pokes=3, selection="sample", seed=11)
    init, goal = Pose(cx=18, cy=18, theta=0), Pose(cx=22, cy=16, theta=0.3)
    a = run_episode(init, goal, random_model, small_arena, config)
    b = run_episode(init, goal, random_model, small_arena, config)
    assert a == b


def test_arena_mismatch(random_model, arena):
    with pytest.raises(PlanningError):
        model_policy(random_model, Pose(cx=30, cy=30, theta=0), arena, PlannerConfig())


def test_plan_next_poke_checks_image_size(random_model, small_arena):
    goal = render(Pose(cx=20, cy=18, theta=0), small_arena)
    poke = plan_next_poke(render(Pose(cx=18, cy=18, theta=0), small_arena), goal, random_model, PlannerConfig())
    assert isinstance(poke, Poke)
    with pytest.raises(ShapeError):
        plan_next_poke(np.zeros((64, 64)), goal, random_model, PlannerConfig())


def test_episode_dump_round_trip(temp_dir):
    arena = ArenaParams()
    first = rollout(Pose(cx=18, cy=32, theta=0.2), Pose(cx=40, cy=32, theta=0), push_from_center, arena, 2)
    second = rollout(Pose(cx=30, cy=30, theta=0), Pose(cx=30, cy=30, theta=0), lambda p: None, arena, 2)
    path = temp_dir / "episodes.jsonl"
    write_episodes(path, [first, second])
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    back = read_episodes(path)
    assert back == [first, second]


def test_step_line_without_header(temp_dir):
    path = temp_dir / "bad.jsonl"
    path.write_text('{"k": 1}\n')
    with pytest.raises(PlanningError):
        read_episodes(path)
