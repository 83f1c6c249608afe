from .actions import (ANGLE_BINS, GRID, LEN_BINS, LOC_BINS, NOPOKE_BIN, DiscretizedAction, discretize,
                      encode_poke, undiscretize)
from .network import Batch, LossParts, ModelMeta, ModelParams, PokeModel, joint_loss, make_batch
from .trainer import EpochStats, TrainResult, Trainer, train, write_training_log

__all__ = [
    "ANGLE_BINS", "GRID", "LEN_BINS", "LOC_BINS", "NOPOKE_BIN", "DiscretizedAction", "discretize",
    "encode_poke", "undiscretize", "Batch", "LossParts", "ModelMeta", "ModelParams", "PokeModel",
    "joint_loss", "make_batch", "EpochStats", "TrainResult", "Trainer", "train", "write_training_log",
]
