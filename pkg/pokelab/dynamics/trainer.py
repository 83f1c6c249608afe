from __future__ import annotations
import csv
import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional
import numpy as np
from ..datastore.base import RecordSource
from ..exceptions import DivergenceError, NonFiniteError, TrainingError
from ..model import TrainConfig
from ..nn.optim import AdamState, adam_step
from .actions import NOPOKE_BIN
from .network import Batch, ModelParams, PokeModel, encode_forward, joint_loss, make_batch

log = logging.getLogger(__name__)

EVAL_BATCH = 256
LOG_FIELDS = ["epoch", "train_loss", "heldout_loss", "heldout_loc_acc", "heldout_angle_acc", "heldout_len_acc"]


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    heldout_loss: Optional[float]
    heldout_loc_acc: Optional[float]
    heldout_angle_acc: Optional[float]
    heldout_len_acc: Optional[float]


@dataclass
class TrainResult:
    model: PokeModel
    log: List[EpochStats] = field(default_factory=list)


def is_heldout(index: int, every: int = 10) -> bool:
    digest = hashlib.blake2b(int(index).to_bytes(8, "little"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % every == 0


def split_indices(n: int, every: int = 10):
    held = np.array([is_heldout(i, every) for i in range(n)], dtype=bool)
    return np.flatnonzero(~held), np.flatnonzero(held)


def with_nopokes(rows: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Turn a random subset of rows into no-poke samples (after pose := before pose)."""
    if fraction <= 0.0:
        return rows
    rows = np.array(rows, dtype=np.float64)
    pick = rng.random(rows.shape[0]) < fraction
    rows[pick, 8:11] = rows[pick, 0:3]
    rows[pick, 3:7] = 0.0
    rows[pick, 7] = 1.0
    return rows


class Trainer:
    """Minibatch Adam on the joint loss; owns the parameters while it runs."""

    def __init__(self, model: PokeModel, config: TrainConfig) -> None:
        self.model = model
        self.config = config
        layers = model.params.ordered()
        self.adam = AdamState.for_params(layers, learning_rate=config.learning_rate, beta1=config.beta1,
                                         beta2=config.beta2, eps=config.eps)
        self._executor = ThreadPoolExecutor(max_workers=config.jobs, thread_name_prefix="pokelab-grad") \
            if config.jobs > 1 else None

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def _loss_kwargs(self):
        return dict(detach_target=self.config.detach_target, inverse_weight=self.config.inverse_weight)

    def gradient(self, batch: Batch) -> float:
        """Accumulate the batch-mean gradient into the model; chunks are reduced in order."""
        params = self.model.params
        lam = self.model.meta.lambda_
        n = len(batch)
        if self._executor is None:
            return joint_loss(params, batch, lam, **self._loss_kwargs()).total

        bounds = np.linspace(0, n, min(self.config.jobs, n) + 1).astype(int)
        chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        shadows = [params.shadow() for _ in chunks]

        def work(i: int) -> float:
            a, b = chunks[i]
            return joint_loss(shadows[i], batch.slice(a, b), lam, scale=(b - a) / n, **self._loss_kwargs()).total

        losses = list(self._executor.map(work, range(len(chunks))))
        for shadow in shadows:
            params.accumulate(shadow)
        return float(sum(l * (b - a) / n for l, (a, b) in zip(losses, chunks)))

    def step(self, batch: Batch) -> float:
        loss = self.gradient(batch)
        adam_step(self.model.params.ordered(), self.adam)
        return loss

    def evaluate(self, source: RecordSource, indices: np.ndarray):
        """Mean joint loss and teacher-forced top-1 accuracies of the three heads."""
        if len(indices) == 0:
            return None, None, None, None
        arena = self.model.arena
        lam = self.model.meta.lambda_
        total = 0.0
        hits = np.zeros(3)
        poked = 0
        for start in range(0, len(indices), EVAL_BATCH):
            idx = np.sort(indices[start:start + EVAL_BATCH])
            batch = make_batch(source.rows()[idx], arena)
            parts = joint_loss(self.model.params, batch, lam, backward=False, **self._loss_kwargs())
            total += parts.total * len(idx)
            loc, ang, ln = parts.logits
            t = batch.targets
            real = t[:, 2] != NOPOKE_BIN
            hits[0] += np.sum((np.argmax(loc, axis=1) == t[:, 0]) & real)
            hits[1] += np.sum((np.argmax(ang, axis=1) == t[:, 1]) & real)
            hits[2] += np.sum(np.argmax(ln, axis=1) == t[:, 2])
            poked += int(real.sum())
        n = len(indices)
        return (total / n, hits[0] / max(poked, 1), hits[1] / max(poked, 1), hits[2] / n)


def train(dataset: RecordSource, config: TrainConfig, *, tag: str = "joint",
          on_epoch: Optional[Callable[[EpochStats], None]] = None, config_json: str = "{}") -> TrainResult:
    """Train a fresh model; epoch 0 is evaluated before the first update."""
    n = len(dataset)
    if n < 1:
        raise TrainingError("dataset is empty")
    lam = 0.0 if tag == "inverse" else config.lambda_
    model = PokeModel.create(dataset.params, latent_dim=config.latent_dim, seed=config.seed, tag=tag, lambda_=lam)
    model.meta = model.meta.model_copy(update={"train_size": n, "config_json": config_json})
    rng = np.random.Generator(np.random.PCG64([config.seed, 1]))
    train_idx, held_idx = split_indices(n, config.heldout_every)
    if len(train_idx) == 0:
        train_idx = np.arange(n)
    result = TrainResult(model=model)
    rows = dataset.rows()

    with Trainer(model, config) as trainer:
        for epoch in range(config.epochs + 1):
            try:
                if epoch == 0:
                    train_loss, *_ = trainer.evaluate(dataset, train_idx[:EVAL_BATCH * 4])
                else:
                    order = rng.permutation(train_idx)
                    losses = []
                    for start in range(0, len(order), config.batch_size):
                        idx = np.sort(order[start:start + config.batch_size])
                        batch_rows = with_nopokes(rows[idx], config.nopoke_fraction, rng)
                        losses.append(trainer.step(make_batch(batch_rows, model.arena)))
                    train_loss = float(np.mean(losses))
                held = trainer.evaluate(dataset, held_idx)
            except NonFiniteError as e:
                raise DivergenceError(epoch, str(e)) from e
            if not np.isfinite(train_loss):
                raise DivergenceError(epoch)
            stats = EpochStats(epoch, float(train_loss), *held)
            log.info("epoch %d train %.4f heldout %s", epoch, stats.train_loss, stats.heldout_loss)
            result.log.append(stats)
            if on_epoch:
                on_epoch(stats)
    return result


def write_training_log(path: str | Path, stats: List[EpochStats], config_json: str = "{}") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config: {config_json}\n")
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        writer.writeheader()
        for s in stats:
            writer.writerow({k: ("" if v is None else v) for k, v in asdict(s).items()})


def mean_latent_norm(params: ModelParams, images: np.ndarray) -> float:
    z, _ = encode_forward(params, images)
    return float(np.linalg.norm(z, axis=1).mean())


def latent_norm_trace(dataset: RecordSource, config: TrainConfig, steps: int, monitor_size: int = 64,
                      every: int = 100) -> List[float]:
    """Mean latent L2 norm on a fixed monitor batch, sampled every `every` optimizer steps.

    Used to observe feature collapse: with inverse_weight 0 and detach_target off
    the forward loss alone can be minimised by shrinking every latent towards zero.
    """
    model = PokeModel.create(dataset.params, latent_dim=config.latent_dim, seed=config.seed,
                             lambda_=max(config.lambda_, 1e-12))
    rng = np.random.Generator(np.random.PCG64([config.seed, 2]))
    rows = dataset.rows()
    monitor = make_batch(rows[: min(monitor_size, len(dataset))], dataset.params).images_t
    trace = [mean_latent_norm(model.params, monitor)]
    with Trainer(model, config) as trainer:
        for step in range(1, steps + 1):
            idx = np.sort(rng.choice(len(dataset), size=min(config.batch_size, len(dataset)), replace=False))
            trainer.step(make_batch(rows[idx], dataset.params))
            if step % every == 0 or step == steps:
                trace.append(mean_latent_norm(model.params, monitor))
    return trace
