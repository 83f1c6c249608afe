"""Paired-episode experiment matrix over training-set sizes and planners."""
from __future__ import annotations
import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
from pydantic import BaseModel
from ..blob import run_blob_episode
from ..config import config_json as effective_config_json
from ..datastore.base import ArrayDataset
from ..datastore.generate import iter_interactions
from ..dynamics.network import PokeModel
from ..dynamics.trainer import train
from ..exceptions import CheckpointError, PlanningError
from ..model import ArenaParams, ExperimentConfig, GlobalConfig
from ..planner import Episode, run_episode
from ..sim.geometry import Pose
from ..sim.physics import random_pose, sample_random_poke, step
from ..types import ModelTag, TerminalReason
from .metrics import pose_error, relative_location_error

log = logging.getLogger(__name__)

CSV_FIELDS = ["model", "train_size", "episode", "seed", "k", "rel_loc_err", "pose_err_deg", "terminal_reason"]
MAX_GOAL_DRAWS = 10_000
MIN_SINGLE_POKE_SHIFT = 1e-3


class MetricRow(BaseModel):
    """One episode; the curves hold the error after k pokes for k = 0..pokes."""
    model: ModelTag
    train_size: int
    episode: int
    seed: int
    pokes: int
    rel_loc_err: List[float]
    pose_err_deg: List[float]
    terminal_reason: TerminalReason

    def csv_rows(self, max_pokes: int) -> List[Dict[str, object]]:
        """One row per k = 0..max_pokes; values after termination repeat the final pose."""
        out = []
        for k in range(max_pokes + 1):
            j = min(k, self.pokes)
            out.append({
                "model": self.model, "train_size": self.train_size, "episode": self.episode,
                "seed": self.seed, "k": k, "rel_loc_err": repr(self.rel_loc_err[j]),
                "pose_err_deg": repr(self.pose_err_deg[j]), "terminal_reason": self.terminal_reason,
            })
        return out


def episode_seed(base_seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([base_seed, episode]).generate_state(1, dtype=np.uint64)[0] >> 1)


def episode_poses(seed: int, arena: ArenaParams, experiment: ExperimentConfig) -> Tuple[Pose, Pose]:
    """(init, goal) drawn from the episode seed alone, with the goal inside the distance band."""
    rng = np.random.Generator(np.random.PCG64(seed))
    lo, hi = experiment.goal_distance
    init = random_pose(arena, rng)
    for _ in range(MAX_GOAL_DRAWS):
        goal = random_pose(arena, rng)
        if lo <= math.hypot(goal.cx - init.cx, goal.cy - init.cy) <= hi:
            return init, goal
    raise PlanningError(f"no goal within distance {experiment.goal_distance} after {MAX_GOAL_DRAWS} draws")


def single_poke_poses(seed: int, arena: ArenaParams) -> Tuple[Pose, Pose]:
    """Goal is the result of one random poke applied to the initial pose."""
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(MAX_GOAL_DRAWS):
        init = random_pose(arena, rng)
        goal = step(init, sample_random_poke(init, arena, rng), arena, rng)
        if math.hypot(goal.cx - init.cx, goal.cy - init.cy) > MIN_SINGLE_POKE_SHIFT:
            return init, goal
    raise PlanningError("no displacing poke found")


def metric_row(episode: Episode, model: ModelTag, train_size: int, index: int, seed: int) -> MetricRow:
    poses = episode.poses
    return MetricRow(
        model=model, train_size=train_size, episode=index, seed=seed, pokes=len(episode.steps),
        rel_loc_err=[relative_location_error(p, episode.goal, episode.init) for p in poses],
        pose_err_deg=[pose_error(p, episode.goal) for p in poses],
        terminal_reason=episode.terminal_reason,
    )


def training_set(size: int, config: GlobalConfig) -> ArrayDataset:
    """Nested datasets: every size is a prefix of the same seeded stream."""
    arena = config.arena.float32_rounded()
    rows = [rec.to_row() for rec in iter_interactions(size, config.experiment.data_seed, arena)]
    return ArrayDataset(np.asarray(rows, dtype=np.float64), arena)


def checkpoint_path(directory: str | Path, tag: str, size: int) -> Path:
    return Path(directory) / f"{tag}_{size}.pokm"


def obtain_models(config: GlobalConfig, size: int, tags: Sequence[str]) -> Dict[str, PokeModel]:
    exp = config.experiment
    learned = [t for t in tags if t != "blob"]
    if not learned:
        return {}
    models: Dict[str, PokeModel] = {}
    if exp.train_inline:
        data = training_set(size, config)
        for tag in learned:
            log.info("training %s model on %d samples", tag, size)
            models[tag] = train(data, config.train, tag=tag, config_json=effective_config_json(config)).model
            if exp.checkpoint_dir:
                models[tag].save(checkpoint_path(exp.checkpoint_dir, tag, size))
        return models
    if not exp.checkpoint_dir:
        raise CheckpointError("checkpoint_dir is required when train_inline is off")
    for tag in learned:
        path = checkpoint_path(exp.checkpoint_dir, tag, size)
        if not path.exists():
            raise CheckpointError(f"missing checkpoint: {path}")
        models[tag] = PokeModel.load(path)
    return models


PoseSampler = Callable[[int], Tuple[Pose, Pose]]


def _run_cells(config: GlobalConfig, models: Optional[Sequence[str]], sampler: PoseSampler,
               max_pokes: int, jobs: int) -> List[MetricRow]:
    exp = config.experiment
    tags = list(models or exp.models)
    arena = config.arena
    planner_cfg = config.planner.model_copy(update={"max_pokes": max_pokes})
    blob_cfg = config.blob.model_copy(update={"max_pokes": max_pokes})
    seeds = [episode_seed(exp.seed, e) for e in range(exp.episodes)]
    pairs = [sampler(s) for s in seeds]

    def episodes_for(policy_run) -> List[Episode]:
        def one(e: int) -> Episode:
            rng = np.random.Generator(np.random.PCG64([seeds[e], 1]))
            init, goal = pairs[e]
            return policy_run(init, goal, rng)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="pokelab-episode") as pool:
                return list(pool.map(one, range(len(seeds))))
        return [one(e) for e in range(len(seeds))]

    blob_eps: Optional[List[Episode]] = None
    if "blob" in tags:
        blob_eps = episodes_for(lambda i, g, rng: run_blob_episode(i, g, arena, blob_cfg, rng))

    rows: List[MetricRow] = []
    for size in exp.train_sizes:
        learned = obtain_models(config, size, tags)
        for tag in tags:
            if tag == "blob":
                eps = blob_eps
            else:
                model = learned[tag]
                eps = episodes_for(lambda i, g, rng, m=model: run_episode(i, g, m, arena, planner_cfg, rng))
            rows.extend(metric_row(ep, tag, size, e, seeds[e]) for e, ep in enumerate(eps))
        log.info("finished train size %d", size)
    return rows


def run_experiment(config: GlobalConfig, models: Optional[Sequence[str]] = None, jobs: int = 1) -> List[MetricRow]:
    """Paired episodes: the episode seed fixes (init, goal) for every model and size."""
    exp = config.experiment
    return _run_cells(config, models, lambda s: episode_poses(s, config.arena, exp),
                      config.planner.max_pokes, jobs)


def run_single_poke_study(config: GlobalConfig, models: Optional[Sequence[str]] = None,
                          jobs: int = 1) -> List[MetricRow]:
    """Goals one random poke away, one poke allowed; pose error is the quantity of interest."""
    return _run_cells(config, models, lambda s: single_poke_poses(s, config.arena), 1, jobs)


def write_metrics_csv(path: str | Path, rows: Sequence[MetricRow], max_pokes: int, config_json: str = "{}") -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config: {config_json}\n")
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            for line in row.csv_rows(max_pokes):
                writer.writerow(line)
                written += 1
    return written
