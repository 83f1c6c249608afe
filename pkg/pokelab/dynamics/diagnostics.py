from __future__ import annotations
from typing import Tuple
import numpy as np
from ..datastore.generate import iter_interactions
from ..model import ArenaParams
from ..nn.gradcheck import GradCheckResult, grad_check
from .network import LAYER_ORDER, ModelParams, joint_loss, make_batch


def check_joint_gradients(arena: ArenaParams, *, latent_dim: int = 128, batch_size: int = 4, lam: float = 0.1,
                          seed: int = 0, h: float = 1e-5, fraction: float = 0.01,
                          floor: float = 1e-8) -> GradCheckResult:
    """Finite-difference check of the full joint loss, per parameter array.

    The target branch is left attached so the analytic gradient is the true
    derivative of the loss. The last sample of the batch is a no-poke. Every
    evaluation reports its ReLU masks and L1 signs so entries whose ±h step
    crosses a kink are redrawn.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    params = ModelParams.initialize(arena.arena_size, latent_dim, rng)
    rows = np.array([r.to_row() for r in iter_interactions(batch_size, seed, arena)], dtype=np.float64)
    if batch_size > 1:
        rows[-1, 8:11] = rows[-1, 0:3]
        rows[-1, 3:7] = 0.0
        rows[-1, 7] = 1.0
    batch = make_batch(rows, arena)

    def objective(backward: bool) -> Tuple[float, np.ndarray]:
        parts = joint_loss(params, batch, lam, backward=backward, detach_target=False, record_pattern=True)
        return parts.total, parts.pattern

    result = grad_check(objective, params.ordered(), rng, h=h, fraction=fraction, floor=floor)
    result.names = [f"{name}.{kind}" for name in LAYER_ORDER for kind in ("weights", "biases")]
    return result
