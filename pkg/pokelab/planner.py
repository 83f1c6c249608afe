"""Greedy closed-loop poking with a learned inverse model."""
from __future__ import annotations
import json
from pathlib import Path
from typing import Callable, Iterable, List, Optional, TextIO
import numpy as np
from pydantic import BaseModel, ConfigDict
from .dynamics.network import PokeModel
from .exceptions import PlanningError
from .model import ArenaParams, PlannerConfig
from .sim.geometry import Pose, Poke
from .sim.physics import step
from .sim.render import render
from .types import TerminalReason

# current pose -> next poke, or None when the policy is done
Policy = Callable[[Pose], Optional[Poke]]


class Step(BaseModel):
    model_config = ConfigDict(frozen=True)

    pose_before: Pose
    poke: Poke
    pose_after: Pose


class Episode(BaseModel):
    init: Pose
    goal: Pose
    steps: List[Step] = []
    terminal_reason: TerminalReason = "max-steps"

    @property
    def poses(self) -> List[Pose]:
        """Pose after k pokes for k = 0..len(steps)."""
        return [self.init] + [s.pose_after for s in self.steps]

    @property
    def final(self) -> Pose:
        return self.steps[-1].pose_after if self.steps else self.init


def rollout(init: Pose, goal: Pose, policy: Policy, arena: ArenaParams, max_pokes: int,
            stop_reason: TerminalReason = "no-poke", rng: Optional[np.random.Generator] = None) -> Episode:
    """Run `policy` until it stops or `max_pokes` pokes were executed."""
    if max_pokes < 1:
        raise PlanningError("max_pokes must be >= 1")
    episode = Episode(init=init, goal=goal)
    pose = init
    for _ in range(max_pokes):
        poke = policy(pose)
        if poke is None or poke.is_nopoke:
            episode.terminal_reason = stop_reason
            return episode
        after = step(pose, poke, arena, rng)
        episode.steps.append(Step(pose_before=pose, poke=poke, pose_after=after))
        pose = after
    episode.terminal_reason = "max-steps"
    return episode


def plan_next_poke(current: np.ndarray, goal: np.ndarray, model: PokeModel, config: PlannerConfig,
                   rng: Optional[np.random.Generator] = None) -> Poke:
    """Encode both images and read one poke off the inverse heads; may return the no-poke."""
    model.check_image(current)
    model.check_image(goal)
    return model.predict_poke(model.encode(current), model.encode(goal), selection=config.selection,
                              temperature=config.temperature, rng=rng)


def model_policy(model: PokeModel, goal: Pose, arena: ArenaParams, config: PlannerConfig,
                 rng: Optional[np.random.Generator] = None) -> Policy:
    """Policy closure; the goal latent is computed once per episode."""
    if model.arena.arena_size != arena.arena_size:
        raise PlanningError(f"model expects {model.arena.arena_size}px images, arena renders {arena.arena_size}px")
    x_goal = model.encode(render(goal, arena))

    def policy(pose: Pose) -> Poke:
        x_t = model.encode(render(pose, arena))
        return model.predict_poke(x_t, x_goal, selection=config.selection, temperature=config.temperature, rng=rng)

    return policy


def run_episode(init: Pose, goal: Pose, model: PokeModel, arena: ArenaParams, config: PlannerConfig,
                rng: Optional[np.random.Generator] = None) -> Episode:
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(config.seed))
    policy = model_policy(model, goal, arena, config, rng)
    return rollout(init, goal, policy, arena, config.max_pokes, stop_reason="no-poke", rng=rng)


def dump_episode(episode: Episode, out: TextIO) -> None:
    """JSON lines: an episode header, then one line per executed poke."""
    out.write(json.dumps({
        "init": episode.init.model_dump(),
        "goal": episode.goal.model_dump(),
        "terminal_reason": episode.terminal_reason,
        "steps": len(episode.steps),
    }) + "\n")
    for k, s in enumerate(episode.steps, start=1):
        out.write(json.dumps({"k": k, **s.model_dump()}) + "\n")


def write_episodes(path: str | Path, episodes: Iterable[Episode]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for ep in episodes:
            dump_episode(ep, fh)


def read_episodes(path: str | Path) -> List[Episode]:
    episodes: List[Episode] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "k" in obj:
                if not episodes:
                    raise PlanningError("step line before episode header")
                obj.pop("k")
                episodes[-1].steps.append(Step.model_validate(obj))
            else:
                episodes.append(Episode(init=obj["init"], goal=obj["goal"],
                                        terminal_reason=obj["terminal_reason"]))
    return episodes
