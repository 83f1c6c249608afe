from __future__ import annotations
from typing import Optional, Tuple
import numpy as np
from ..exceptions import ShapeError


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = np.atleast_2d(logits) / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, targets, weights: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Mean of -log softmax(logits)[target] over the batch, and its logit gradient.

    A 1-D `logits` with an int target is treated as a batch of one. `weights`
    (one per row) lets rows drop out of the mean's numerator without changing
    the denominator.
    """
    single = logits.ndim == 1
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    t = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    n, k = z.shape
    if t.shape != (n,):
        raise ShapeError(f"expected {n} targets, got {t.shape}")
    if np.any(t < 0) or np.any(t >= k):
        raise ShapeError(f"target index out of range [0, {k})")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)

    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    nll = log_norm - shifted[np.arange(n), t]
    loss = float(np.sum(w * nll) / n)

    grad = np.exp(shifted - log_norm[:, None])
    grad[np.arange(n), t] -= 1.0
    grad *= (w / n)[:, None]
    return loss, (grad[0] if single else grad)


def l1_loss(pred: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean absolute difference; subgradient sign(pred - target)/N, zero at ties."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"l1_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size
