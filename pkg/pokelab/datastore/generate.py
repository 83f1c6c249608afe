from __future__ import annotations
import logging
from pathlib import Path
import numpy as np
from ..exceptions import DatasetError
from ..model import ArenaParams
from ..sim.geometry import Pose, Poke, wrap_angle
from ..sim.physics import random_pose, sample_random_poke, step
from .base import InteractionRecord
from .binary import DatasetHeader, DatasetWriter

log = logging.getLogger(__name__)

EPISODE_LENGTH = 20


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _f32(v: float) -> float:
    return float(np.float32(v))


def _stored_pose(pose: Pose) -> Pose:
    return Pose(cx=_f32(pose.cx), cy=_f32(pose.cy), theta=_f32(wrap_angle(_f32(pose.theta))))


def _stored_poke(poke: Poke) -> Poke:
    return Poke(px=_f32(poke.px), py=_f32(poke.py), theta=_f32(wrap_angle(_f32(poke.theta))), length=_f32(poke.length))


def iter_interactions(n: int, seed: int, params: ArenaParams):
    """Chains of EPISODE_LENGTH pokes; the pose is re-randomised at each chain start.

    Values are rounded to f32 before they are stepped, so every yielded record is
    exactly what the file stores and consecutive records share poses bit-for-bit.
    """
    rng = make_rng(seed)
    pose = None
    for i in range(n):
        if i % EPISODE_LENGTH == 0:
            pose = _stored_pose(random_pose(params, rng))
        poke = _stored_poke(sample_random_poke(pose, params, rng))
        after = _stored_pose(step(pose, poke, params, rng))
        yield InteractionRecord(pose_t=pose, poke=poke, pose_t1=after)
        pose = after


def generate(n: int, seed: int, params: ArenaParams, path: str | Path) -> DatasetHeader:
    if n < 1:
        raise DatasetError(f"record count must be >= 1, got {n}")
    if not 0 <= seed < 2 ** 64:
        raise DatasetError(f"seed must fit in an unsigned 64-bit header field, got {seed}")
    stored = params.float32_rounded()
    log.info("generating %d records (seed %d) into %s", n, seed, path)
    with DatasetWriter(path, stored, seed) as writer:
        for rec in iter_interactions(n, seed, stored):
            writer.write(rec)
    return writer.close()
