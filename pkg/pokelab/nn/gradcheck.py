from __future__ import annotations
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union
import numpy as np
from .layers import LayerParams

# objective(backward) -> loss, or (loss, activation pattern); with backward=True
# it must also accumulate gradients
Evaluation = Union[float, Tuple[float, np.ndarray]]
Objective = Callable[[bool], Evaluation]

EPS = float(np.finfo(np.float64).eps)


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def _unpack(value: Evaluation) -> Tuple[float, Optional[np.ndarray]]:
    if isinstance(value, tuple):
        loss, pattern = value
        return float(loss), pattern
    return float(value), None


def _same_pattern(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return True
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass
class GradCheckResult:
    """Per-array maxima over the entries actually compared.

    `kinks` counts sampled entries whose ±h evaluations changed the
    activation pattern; `unresolved` counts entries whose gradient is below
    the round-off resolution of the central difference. Both were redrawn.
    """

    worst: float
    per_array: List[float]
    checked: List[int]
    kinks: List[int]
    unresolved: List[int]
    names: List[str] = field(default_factory=list)

    def by_name(self) -> Dict[str, float]:
        return dict(zip(self.names, self.per_array))


def grad_check(
    objective: Objective,
    params: List[LayerParams],
    rng: np.random.Generator,
    h: float = 1e-5,
    fraction: float = 0.01,
    min_per_array: int = 3,
    floor: float = 1e-8,
    max_roundoff: float = 1e-5,
    max_draws: int = 4,
) -> GradCheckResult:
    """Central-difference check over a random subsample of every parameter array.

    Arrays are visited as weights then biases of params[0], params[1], ...
    When the objective also returns an activation pattern (ReLU masks, L1
    signs), an entry whose +h or -h evaluation changes that pattern straddles
    a kink and is replaced by a fresh draw, as is an entry where
    eps·|L|/h exceeds `max_roundoff` times the gradient. At most
    `max_draws` times the target count is drawn per array.
    """
    for p in params:
        p.zero_grad()
    _, base_pattern = _unpack(objective(True))
    analytic = [g.copy() for p in params for g in p.grads()]
    arrays = [a for p in params for a in p.arrays()]
    for p in params:
        p.zero_grad()

    per_array: List[float] = []
    checked: List[int] = []
    kinks: List[int] = []
    unresolved: List[int] = []
    for arr, grad in zip(arrays, analytic):
        flat = arr.reshape(-1)
        flat_grad = grad.reshape(-1)
        target = min(flat.size, max(min_per_array, math.ceil(fraction * flat.size)))
        order = rng.permutation(flat.size)[:max_draws * target]
        worst, n_checked, n_kinks, n_unresolved = 0.0, 0, 0, 0
        for idx in order:
            if n_checked == target:
                break
            orig = flat[idx]
            flat[idx] = orig + h
            plus, plus_pattern = _unpack(objective(False))
            flat[idx] = orig - h
            minus, minus_pattern = _unpack(objective(False))
            flat[idx] = orig
            if not (_same_pattern(base_pattern, plus_pattern) and _same_pattern(base_pattern, minus_pattern)):
                n_kinks += 1
                continue
            numeric = (plus - minus) / (2.0 * h)
            a = float(flat_grad[idx])
            roundoff = EPS * max(abs(plus), abs(minus)) / h
            if a != numeric and roundoff > max_roundoff * max(abs(a), abs(numeric)):
                n_unresolved += 1
                continue
            worst = max(worst, relative_error(a, numeric, floor))
            n_checked += 1
        per_array.append(worst)
        checked.append(n_checked)
        kinks.append(n_kinks)
        unresolved.append(n_unresolved)
    return GradCheckResult(max(per_array) if per_array else 0.0, per_array, checked, kinks, unresolved)
