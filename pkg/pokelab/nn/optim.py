from __future__ import annotations
from dataclasses import dataclass, field
from typing import List
import numpy as np
from ..exceptions import NonFiniteError, ShapeError
from .layers import LayerParams


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: List[np.ndarray] = field(default_factory=list)
    second: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: List[LayerParams], **hyper) -> "AdamState":
        state = cls(**hyper)
        for p in params:
            for arr in p.arrays():
                state.first.append(np.zeros_like(arr))
                state.second.append(np.zeros_like(arr))
        return state


def adam_step(params: List[LayerParams], state: AdamState) -> None:
    """Bias-corrected Adam update in place; gradients are zeroed afterwards."""
    arrays = [a for p in params for a in p.arrays()]
    grads = [g for p in params for g in p.grads()]
    if len(arrays) != len(state.first):
        raise ShapeError("adam state does not match parameter list")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for arr, g, m, v in zip(arrays, grads, state.first, state.second):
        if m.shape != arr.shape:
            raise ShapeError("adam moment shape mismatch")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        arr -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    for p in params:
        p.zero_grad()
