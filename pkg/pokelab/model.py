from __future__ import annotations
import math
from typing import List, Optional, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from .types import ModelTag, Selection, Study


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class ArenaParams(_Section):
    """Walled square arena holding one rigid rectangle (all lengths in pixels)."""
    arena_size: int = 64
    rect_w: float = 16.0
    rect_h: float = 8.0
    k_t: float = 0.8
    k_r: float = 0.03
    wall_margin: float = 2.0
    noise_std: float = 0.0
    poke_len_range: Tuple[float, float] = (4.0, 20.0)

    @model_validator(mode="after")
    def check_geometry(self) -> "ArenaParams":
        if not (self.arena_size > self.rect_w > self.rect_h > 0):
            raise ValueError("need arena_size > rect_w > rect_h > 0")
        if not (0.0 < self.k_t <= 1.0):
            raise ValueError("k_t must be in (0, 1]")
        lo, hi = self.poke_len_range
        if not (0.0 <= lo < hi):
            raise ValueError("poke_len_range must satisfy 0 <= l_min < l_max")
        if self.noise_std < 0 or self.wall_margin < 0:
            raise ValueError("noise_std and wall_margin must be >= 0")
        # any orientation must fit between the walls
        if self.arena_size - 2 * self.wall_margin < math.hypot(self.rect_w, self.rect_h):
            raise ValueError("arena too small for a freely rotating rectangle")
        return self

    @property
    def l_min(self) -> float:
        return self.poke_len_range[0]

    @property
    def l_max(self) -> float:
        return self.poke_len_range[1]

    def as_floats(self) -> List[float]:
        """Field order used by the dataset header."""
        return [float(self.arena_size), self.rect_w, self.rect_h, self.k_t, self.k_r,
                self.wall_margin, self.noise_std, self.l_min, self.l_max]

    @classmethod
    def from_floats(cls, values: List[float]) -> "ArenaParams":
        size, w, h, k_t, k_r, margin, noise, lo, hi = (float(v) for v in values)
        return cls(arena_size=int(round(size)), rect_w=w, rect_h=h, k_t=k_t, k_r=k_r,
                   wall_margin=margin, noise_std=noise, poke_len_range=(lo, hi))

    def float32_rounded(self) -> "ArenaParams":
        """The params exactly as they survive a round trip through the f32 header."""
        return ArenaParams.from_floats([float(v) for v in np.asarray(self.as_floats(), dtype=np.float32)])


class TrainConfig(_Section):
    lambda_: float = Field(0.1, alias="lambda", ge=0.0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(10, ge=1)
    learning_rate: float = Field(1e-4, gt=0.0)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = Field(0, ge=0)
    latent_dim: int = Field(128, ge=1)
    heldout_every: int = Field(10, ge=2)
    nopoke_fraction: float = Field(0.05, ge=0.0, lt=1.0)
    detach_target: bool = True
    inverse_weight: float = Field(1.0, ge=0.0)
    jobs: int = Field(1, ge=1)


class PlannerConfig(_Section):
    max_pokes: int = Field(10, ge=1)
    selection: Selection = "argmax"
    temperature: float = Field(1.0, gt=0.0)
    seed: int = Field(0, ge=0)


class BlobConfig(_Section):
    threshold: float = Field(3.0, ge=0.0)
    len_gain: float = Field(1.25, gt=0.0)
    max_pokes: int = Field(10, ge=1)


class ExperimentConfig(_Section):
    study: Study = "planning"
    train_sizes: List[int] = Field(default_factory=lambda: [10_000, 20_000, 100_000])
    models: List[ModelTag] = Field(default_factory=lambda: ["joint", "inverse", "blob"])
    episodes: int = Field(200, ge=1)
    seed: int = Field(1234, ge=0)
    data_seed: int = Field(42, ge=0)
    headline_k: int = Field(5, ge=0)
    goal_distance: Tuple[float, float] = (8.0, 40.0)
    train_inline: bool = True
    checkpoint_dir: Optional[str] = None

    @field_validator("train_sizes")
    @classmethod
    def check_sizes(cls, v):
        if not v or any(n < 1 for n in v):
            raise ValueError("train_sizes must be a non-empty list of positive counts")
        return v

    @field_validator("goal_distance")
    @classmethod
    def check_distance(cls, v):
        lo, hi = v
        if not (0.0 < lo < hi):
            raise ValueError("goal_distance must satisfy 0 < min < max")
        return v


class LoggingConfig(_Section):
    enabled: bool = False
    db_path: str = "./pokelab.db"


class PathsConfig(_Section):
    data_dir: str = "./data"
    out_dir: str = "./runs"


class GlobalConfig(_Section):
    arena: ArenaParams = Field(default_factory=ArenaParams)
    train: TrainConfig = Field(default_factory=TrainConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    blob: BlobConfig = Field(default_factory=BlobConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    paths: PathsConfig = Field(default_factory=PathsConfig)
