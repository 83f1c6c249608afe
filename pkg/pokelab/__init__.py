from .model import ArenaParams, GlobalConfig, TrainConfig, PlannerConfig, BlobConfig, ExperimentConfig
from .config import load_config
from .sim import Pose, Poke, step, render
from .dynamics import PokeModel, train
from .planner import Episode, run_episode
from .blob import detect_blob, run_blob_episode

__all__ = [
    "ArenaParams", "GlobalConfig", "TrainConfig", "PlannerConfig", "BlobConfig", "ExperimentConfig",
    "load_config", "Pose", "Poke", "step", "render", "PokeModel", "train", "Episode", "run_episode",
    "detect_blob", "run_blob_episode",
]
